#pragma once

#include <stdexcept>
#include <string>

namespace scgfm {

// Error taxonomy: every library failure is one of these, so callers can
// distinguish bad files (parse), bad values (integrity), bad indices (index),
// numerically broken runs (numerical), and out-of-contract requests (unsupported).
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parse_error : error {
    explicit parse_error(const std::string& msg) : error("parse error: " + msg) {}
};

struct integrity_error : error {
    explicit integrity_error(const std::string& msg) : error("integrity error: " + msg) {}
};

struct index_error : error {
    explicit index_error(const std::string& msg) : error("index error: " + msg) {}
};

struct numerical_error : error {
    explicit numerical_error(const std::string& msg) : error("numerical error: " + msg) {}
};

struct unsupported_error : error {
    explicit unsupported_error(const std::string& msg) : error("unsupported instance: " + msg) {}
};

struct io_error : error {
    explicit io_error(const std::string& msg) : error("io error: " + msg) {}
};

}  // namespace scgfm
