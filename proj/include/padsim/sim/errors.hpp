#ifndef PADSIM_SIM_ERRORS_HPP
#define PADSIM_SIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace padsim {

/// Invalid scenario, machine, or distribution parameters. The message names
/// the offending field.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was breached mid-run (engine misuse, accounting
/// mismatch). Runs that throw this must exit non-zero.
class InvariantError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace padsim

#endif // PADSIM_SIM_ERRORS_HPP
