#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace flat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

/// Row counts or column counts disagree.
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
    const char* kind() const noexcept override { return "dimension_mismatch"; }
};

/// NaN or infinity where a finite value is required.
class NonFiniteError : public ValidationError {
public:
    using ValidationError::ValidationError;
    const char* kind() const noexcept override { return "non_finite"; }
};

/// Parameter out of range, or a configuration that makes a system singular.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }
    const char* kind() const noexcept override { return "config"; }

private:
    std::string field_;
};

/// Coordinate descent hit its sweep budget. Carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate, int sweeps,
                     double last_step)
        : Error(what), last_iterate_(std::move(last_iterate)), sweeps_(sweeps),
          last_step_(last_step) {}
    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    int sweeps() const noexcept { return sweeps_; }
    double last_step() const noexcept { return last_step_; }
    const char* kind() const noexcept override { return "non_convergence"; }

private:
    Eigen::VectorXd last_iterate_;
    int sweeps_;
    double last_step_;
};

/// Metric is not defined for the given partition (e.g. fewer than two clusters).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "undefined_metric"; }
};

/// Wraps a failure with the pipeline stage that produced it.
class StageError : public Error {
public:
    StageError(std::string stage, std::string inner_kind, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)),
          inner_kind_(std::move(inner_kind)) {}
    const std::string& stage() const noexcept { return stage_; }
    const char* kind() const noexcept override { return inner_kind_.c_str(); }

private:
    std::string stage_;
    std::string inner_kind_;
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

}  // namespace flat
