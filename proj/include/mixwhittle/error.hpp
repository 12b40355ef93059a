#ifndef MIXWHITTLE_ERROR_HPP
#define MIXWHITTLE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixwhittle {

/// Parameter outside its admissible domain (non-positive scale, probability
/// outside [0,1], too few basis functions, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Series or matrix dimensions do not line up, or an input is too short.
class LengthError : public std::length_error {
public:
    explicit LengthError(const std::string& what) : std::length_error(what) {}
};

/// A covariance matrix failed to factorize, or a spectrum came out negative.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::vector<double> parameters = {})
        : std::runtime_error(what), parameters_(std::move(parameters)) {}

    const std::vector<double>& parameters() const noexcept { return parameters_; }

private:
    std::vector<double> parameters_;
};

/// Rank-deficient regression; carries the indices of dependent columns.
class SingularError : public std::runtime_error {
public:
    SingularError(const std::string& what, std::vector<std::size_t> columns)
        : std::runtime_error(what), columns_(std::move(columns)) {}

    const std::vector<std::size_t>& dependent_columns() const noexcept { return columns_; }

private:
    std::vector<std::size_t> columns_;
};

/// Model or job specification is inconsistent with itself or with the data.
class SpecError : public std::invalid_argument {
public:
    explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace mixwhittle

#endif  // MIXWHITTLE_ERROR_HPP
