#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace capire {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Missing cells are carried as quiet NaN until serialization.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double x) { return std::isnan(x); }

// Configuration problems: bad config file, unknown keys, infeasible values.
// Mapped to exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or structurally garbled input files. Distinct from a failed
// ValidationReport, which is a well-formed negative result.
class IngestError : public std::runtime_error {
public:
    explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// A subcommand was invoked before the stage that produces its inputs.
class DependencyError : public std::runtime_error {
public:
    DependencyError(const std::string& missing, const std::string& produced_by)
        : std::runtime_error("missing artifact '" + missing + "': run `capire " +
                             produced_by + "` first"),
          artifact(missing), required_subcommand(produced_by) {}
    std::string artifact;
    std::string required_subcommand;
};

class PreconditionError : public std::runtime_error {
public:
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fixed-width round-trippable formatting used for every serialized double.
std::string format_double(double x);

}  // namespace capire
