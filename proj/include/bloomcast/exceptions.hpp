/**
 * @file
 * @brief Exception hierarchy shared by all bloomcast modules.
 *
 * Each exception maps onto one of the process exit codes used by the command line tool:
 * I/O and malformed input (1), invalid configuration or arguments (2), numeric failure (3).
 */

#pragma once

#include <cstddef>    // std::size_t
#include <stdexcept>  // std::runtime_error
#include <string>     // std::string

namespace bloomcast {

/**
 * @brief Base class of all exceptions thrown by bloomcast.
 */
class exception : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read, or written.
class file_exception : public exception {
  public:
    using exception::exception;
};

/// An input file exists but its content violates the expected format (bad header, unparseable date, duplicate rows, ...).
class data_format_exception : public exception {
  public:
    using exception::exception;
};

/// A record misses the values needed to derive its average temperature.
class unimputable_record_exception : public data_format_exception {
  public:
    using data_format_exception::data_format_exception;
};

/// A function precondition on its arguments was violated (shape mismatch, out-of-range label, ...).
class invalid_argument_exception : public exception {
  public:
    using exception::exception;
};

/// A run configuration is inconsistent or out of range.
class config_exception : public exception {
  public:
    using exception::exception;
};

/**
 * @brief The SMO solver exhausted its iteration budget before reaching the KKT tolerance.
 */
class convergence_exception : public exception {
  public:
    convergence_exception(const std::string &msg, const double best_objective, const std::size_t kkt_violations) :
        exception{ msg },
        best_objective_{ best_objective },
        kkt_violations_{ kkt_violations } { }

    /// Dual objective of the last iterate.
    [[nodiscard]] double best_objective() const noexcept { return best_objective_; }
    /// Number of multipliers violating the KKT conditions at the last iterate.
    [[nodiscard]] std::size_t kkt_violations() const noexcept { return kkt_violations_; }

  private:
    double best_objective_;
    std::size_t kkt_violations_;
};

/**
 * @brief Training produced non-finite values.
 */
class divergence_exception : public exception {
  public:
    divergence_exception(const std::string &msg, const std::size_t epoch) :
        exception{ msg },
        epoch_{ epoch } { }

    [[nodiscard]] std::size_t epoch() const noexcept { return epoch_; }

  private:
    std::size_t epoch_;
};

}  // namespace bloomcast
