#pragma once

#include <stdexcept>
#include <string>

namespace volerr {

/// Invalid or inconsistent measurement data (CLI exit code 1).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema, or command-line settings (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stacked link-error Jacobian too poorly conditioned to identify all parameters.
class RankDeficientError : public DataError {
public:
    RankDeficientError(const std::string& what, double condition)
        : DataError(what), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Prefixes the message of a pipeline failure with the stage that produced it.
template <typename Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const RankDeficientError& e) {
        throw RankDeficientError(stage + ": " + e.what(), e.condition());
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw DataError(stage + ": " + e.what());
    }
}

}  // namespace volerr
