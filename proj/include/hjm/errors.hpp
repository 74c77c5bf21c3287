#pragma once

#include <stdexcept>
#include <string>

namespace hjm {

// A computation produced a non-finite value at grid location (k, l).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int k, int l)
      : std::runtime_error(what + " at (k=" + std::to_string(k) + ", l=" + std::to_string(l) + ")"),
        k_(k),
        l_(l) {}

  int k() const { return k_; }
  int l() const { return l_; }

 private:
  int k_;
  int l_;
};

}  // namespace hjm
