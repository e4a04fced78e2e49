#pragma once

#include <stdexcept>
#include <string>

namespace ckd {

// All library failures throw Error. `stage` tags the pipeline stage (or module)
// that raised it so the CLI can report "error [stage:...]" and exit nonzero.
class Error : public std::runtime_error {
public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

[[noreturn]] inline void fail(const std::string& stage, const std::string& msg) {
  throw Error(stage, msg);
}

inline void require(bool cond, const std::string& stage, const std::string& msg) {
  if (!cond) fail(stage, msg);
}

}  // namespace ckd
