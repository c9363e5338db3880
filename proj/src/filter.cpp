#include "clubench/filter.hpp"

#include <algorithm>
#include <cctype>

namespace clubench {

const std::vector<FieldSpec>& filter_fields() {
    static const std::vector<FieldSpec> fields = {
        {"name", false, "job name"},
        {"task", false, "task path the job belongs to"},
        {"state", false,
         "pending | running | postponed | done | failed | timedout | killed (case-insensitive)"},
        {"tstart", true, "last start time, seconds since the epoch"},
        {"duration", true, "elapsed seconds (so far when running)"},
        {"rss", true, "resident set size, MiB (peak once finished)"},
        {"attempts", true, "number of times the job entered running"},
    };
    return fields;
}

const FieldSpec* find_field(const std::string& name) {
    for (const auto& f : filter_fields())
        if (f.name == name) return &f;
    return nullptr;
}

FilterQuery parse_filter(std::string_view expr) {
    FilterQuery q;
    if (trim(expr).empty()) return q;
    for (auto piece : split_char(expr, ',')) {
        const std::string raw(trim(piece));
        if (raw.empty()) throw QueryError(raw, "empty clause");

        FilterClause c;
        c.raw = raw;
        const size_t colon = raw.find(':');
        c.field = raw.substr(0, colon == std::string::npos ? raw.size() : colon);
        const FieldSpec* spec = find_field(c.field);
        if (!spec) throw QueryError(raw, "unknown field '" + c.field + "'");

        if (colon == std::string::npos) {
            c.kind = FilterClause::Kind::Presence;
            q.clauses.push_back(std::move(c));
            continue;
        }
        const std::string value = raw.substr(colon + 1);
        if (value.empty()) throw QueryError(raw, "missing value after ':'");

        const size_t dots = value.find("..");
        if (dots != std::string::npos) {
            if (!spec->numeric)
                throw QueryError(raw, "field '" + c.field + "' is text; ranges need a numeric field");
            c.kind = FilterClause::Kind::Range;
            const std::string lo = value.substr(0, dots);
            const std::string hi = value.substr(dots + 2);
            if (lo.empty() && hi.empty()) throw QueryError(raw, "range needs at least one bound");
            double v = 0;
            if (!lo.empty()) {
                if (!parse_double(lo, v)) throw QueryError(raw, "bad lower bound '" + lo + "'");
                c.lo = v;
            }
            if (!hi.empty()) {
                if (!parse_double(hi, v)) throw QueryError(raw, "bad upper bound '" + hi + "'");
                c.hi = v;
            }
            if (c.lo && c.hi && *c.lo > *c.hi)
                throw QueryError(raw, "empty range: lower bound exceeds upper bound");
        } else {
            c.kind = FilterClause::Kind::Exact;
            if (spec->numeric) {
                if (!parse_double(value, c.number))
                    throw QueryError(raw, "field '" + c.field + "' is numeric; '" + value +
                                              "' is not a number");
            } else {
                c.text = value;
            }
        }
        q.clauses.push_back(std::move(c));
    }
    return q;
}

std::optional<double> numeric_field(const JobView& job, const std::string& field) {
    if (field == "tstart") return job.tstart;
    if (field == "duration") return job.duration;
    if (field == "rss") return job.rss;
    if (field == "attempts") return static_cast<double>(job.attempts);
    return std::nullopt;
}

std::optional<std::string> string_field(const JobView& job, const std::string& field) {
    if (field == "name") return job.name;
    if (field == "state") return job.state;
    if (field == "task") {
        if (job.task.empty()) return std::nullopt;
        return job.task;
    }
    return std::nullopt;
}

namespace {

bool clause_matches(const FilterClause& c, const JobView& job) {
    const FieldSpec* spec = find_field(c.field);
    if (!spec) return false;
    if (spec->numeric) {
        const auto v = numeric_field(job, c.field);
        if (!v) return false;
        switch (c.kind) {
        case FilterClause::Kind::Presence: return true;
        case FilterClause::Kind::Exact: return *v == c.number;
        case FilterClause::Kind::Range:
            if (c.lo && *v < *c.lo) return false;
            if (c.hi && *v > *c.hi) return false;
            return true;
        }
        return false;
    }
    const auto s = string_field(job, c.field);
    if (!s) return false;
    if (c.kind == FilterClause::Kind::Presence) return true;
    if (c.field == "state") {
        // states are a fixed vocabulary, so spelling Running for running
        // should work; names and task paths stay case-exact
        return std::equal(s->begin(), s->end(), c.text.begin(), c.text.end(),
                          [](char a, char b) {
                              return std::tolower(static_cast<unsigned char>(a)) ==
                                     std::tolower(static_cast<unsigned char>(b));
                          });
    }
    return *s == c.text;
}

} // namespace

bool matches(const FilterQuery& q, const JobView& job) {
    for (const auto& c : q.clauses)
        if (!clause_matches(c, job)) return false;
    return true;
}

std::vector<JobView> apply_filter(const FilterQuery& q, const std::vector<JobView>& jobs) {
    std::vector<JobView> out;
    for (const auto& j : jobs)
        if (matches(q, j)) out.push_back(j);
    return out;
}

} // namespace clubench
