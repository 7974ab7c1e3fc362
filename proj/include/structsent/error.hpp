#pragma once

#include <stdexcept>
#include <string>

namespace structsent {

// Failure classes raised by the public API. Messages carry the offending
// identifiers (shapes, sentence ids, parameter names) verbatim.

struct dimension_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct empty_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct label_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct optimizer_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct coverage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct alignment_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct span_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace structsent
