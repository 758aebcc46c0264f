#pragma once

#include <stdexcept>
#include <string>

namespace nsum {

// Error categories surfaced by the library. The CLI maps these onto exit
// codes (io -> 1, usage -> 2, everything else -> 3).
enum class Errc {
    missing_column,
    non_integer_count,
    unknown_municipality,
    empty_dataset,
    domain,
    no_known_groups,
    zero_degree,
    adaptation_failure,
    degenerate,
    io,
};

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void throw_domain(const std::string& msg) {
    throw Error(Errc::domain, msg);
}

} // namespace nsum
