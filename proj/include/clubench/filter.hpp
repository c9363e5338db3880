#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clubench/snapshot.hpp"
#include "clubench/util.hpp"

namespace clubench {

/// One filterable job attribute. The same table drives query parsing,
/// evaluation, column selection and the /apinfo self-description, so the
/// three can never drift apart.
struct FieldSpec {
    std::string name;
    bool numeric = false;
    std::string describe; // one-line meaning incl. unit
};
const std::vector<FieldSpec>& filter_fields();
const FieldSpec* find_field(const std::string& name);

/// Raised on malformed queries; carries the offending clause verbatim so
/// HTTP handlers can echo it in the 400 body.
class QueryError : public InvalidArgument {
public:
    QueryError(const std::string& clause, const std::string& why)
        : InvalidArgument("bad filter clause '" + clause + "': " + why), clause_(clause) {}
    const std::string& clause() const { return clause_; }

private:
    std::string clause_;
};

/// One clause of a filter expression.
struct FilterClause {
    enum class Kind { Presence, Exact, Range };
    std::string field;
    Kind kind = Kind::Presence;
    std::string text;         // Exact on a string field
    double number = 0;        // Exact on a numeric field
    std::optional<double> lo; // Range bounds; absent side unbounded
    std::optional<double> hi;
    std::string raw; // clause as written
};

/// Comma-separated conjunction: "<field>[:<value|lo..hi>][,...]".
///   state:running            exact match
///   rss:100..500             closed range (numeric fields only)
///   duration:30..             half-open range
///   tstart                    presence
struct FilterQuery {
    std::vector<FilterClause> clauses;
};

FilterQuery parse_filter(std::string_view expr); // throws QueryError

/// Field accessors used by both the filter and the table renderers.
std::optional<double> numeric_field(const JobView& job, const std::string& field);
std::optional<std::string> string_field(const JobView& job, const std::string& field);

bool matches(const FilterQuery& q, const JobView& job);
std::vector<JobView> apply_filter(const FilterQuery& q, const std::vector<JobView>& jobs);

} // namespace clubench
