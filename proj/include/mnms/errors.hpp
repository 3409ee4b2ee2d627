#pragma once

#include <stdexcept>
#include <string>

namespace mnms {

// Base for everything thrown by the library. Subclasses exist where a
// caller plausibly wants to distinguish the failure kind.
class error : public std::runtime_error {
  public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

class spec_error : public error {          // invalid relation/selectivity spec
  public:
    using error::error;
};

class schema_error : public error {        // attribute lookup / width mismatch
  public:
    using error::error;
};

class topology_error : public error {      // fabric capacity / node range
  public:
    using error::error;
};

class address_error : public error {       // PGAS address out of range
  public:
    using error::error;
};

class engine_error : public error {        // locality violation, step budget
  public:
    using error::error;
};

class oracle_error : public error {        // oracle unavailable or over budget
  public:
    using error::error;
};

class plan_error : public error {          // n-way plan too short
  public:
    using error::error;
};

class config_error : public error {        // bad config key/value
  public:
    using error::error;
};

class io_error : public error {            // file read/write failures
  public:
    using error::error;
};

class parse_error : public error {         // malformed CSV and friends
  public:
    using error::error;
};

}  // namespace mnms
