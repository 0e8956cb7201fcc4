#pragma once

#include <stdexcept>
#include <string>

namespace wattplan {

// Error identities surfaced by the library. The CLI maps these onto exit
// codes: config -> 1, data-shaped problems -> 2, everything else -> 3.
enum class Errc {
  config,
  parse,
  negative_power,
  bad_timestamp,
  empty_trace,
  device_never_seen,
  insufficient_data,
  dimension_mismatch,
  length_mismatch,
  invalid_state,
  not_stochastic,
  io,
  bad_version,
  malformed_metrics,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace wattplan
