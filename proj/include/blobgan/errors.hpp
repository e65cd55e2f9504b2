#pragma once

#include <stdexcept>
#include <string>

namespace blobgan {

// Invalid argument values or incompatible shapes.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// An operation was invoked on an object that is not ready for it.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed or unsupported serialized data. `section` names the part of the
// input that failed to parse (e.g. "header", "tensor:G.block0.weight").
class FormatError : public std::runtime_error {
public:
    FormatError(std::string section, const std::string& what)
        : std::runtime_error(section + ": " + what), section_(std::move(section)) {}

    const std::string& section() const noexcept { return section_; }

private:
    std::string section_;
};

}  // namespace blobgan
