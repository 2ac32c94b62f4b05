#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace repnet {

enum class ErrorKind {
  InvalidArgument,  // bad call arguments, unsupported option
  Spec,             // model spec / schema problems
  Shape,            // tensor or parameter shape mismatch
  Io,               // file format or filesystem failure
  State,            // operation invalid for the object's current state
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

template <class... A>
std::string cat(A&&... a) {
  std::ostringstream o;
  (o << ... << a);
  return o.str();
}

template <class... A>
[[noreturn]] void fail(ErrorKind kind, A&&... a) {
  throw Error(kind, cat(std::forward<A>(a)...));
}

}  // namespace repnet
