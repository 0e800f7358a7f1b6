#pragma once

#include <stdexcept>
#include <string>

namespace panelfe {

// Base for all data-shape errors (CLI maps these to exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Base for all numerical errors (CLI maps these to exit code 4).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingCell : DataError {
  MissingCell(const std::string& id, const std::string& t)
      : DataError("missing cell (id=" + id + ", t=" + t + ")"), id(id), t(t) {}
  std::string id, t;
};

struct NonNumeric : DataError {
  NonNumeric(const std::string& id, const std::string& t, const std::string& tok)
      : DataError("non-numeric value '" + tok + "' at (id=" + id + ", t=" + t + ")") {}
};

struct DuplicateRow : DataError {
  DuplicateRow(const std::string& id, const std::string& t)
      : DataError("duplicate row (id=" + id + ", t=" + t + ")") {}
};

struct LagTooLarge : DataError {
  LagTooLarge(int lag, int T)
      : DataError("lag " + std::to_string(lag) + " >= T=" + std::to_string(T)) {}
};

struct TooShort : DataError {
  explicit TooShort(int T)
      : DataError("panel too short for half-splitting: T=" + std::to_string(T)) {}
};

struct SingularDesign : NumericError {
  explicit SingularDesign(double rel_min_eig, const std::string& where = "")
      : NumericError("singular within design" + (where.empty() ? "" : " [" + where + "]") +
                     ": relative min eigenvalue " + std::to_string(rel_min_eig)),
        rel_min_eig(rel_min_eig) {}
  double rel_min_eig;
};

struct DegenerateVariance : NumericError {
  using NumericError::NumericError;
};

struct SingularRestriction : NumericError {
  using NumericError::NumericError;
};

struct NotApplicable : DataError {
  using DataError::DataError;
};

struct BadLevel : DataError {
  explicit BadLevel(double level)
      : DataError("confidence level must lie strictly in (0,1), got " + std::to_string(level)) {}
};

struct TooFewReplicates : DataError {
  explicit TooFewReplicates(int B)
      : DataError("need at least 100 bootstrap replicates, got " + std::to_string(B)) {}
};

struct SchemeMismatch : DataError {
  using DataError::DataError;
};

struct NonStationarySpec : DataError {
  using DataError::DataError;
};

struct NoClosedForm : DataError {
  using DataError::DataError;
};

struct ReplicationFailure : NumericError {
  using NumericError::NumericError;
};

}  // namespace panelfe
