#pragma once

#include <stdexcept>
#include <string>

namespace leadqa {

// Process exit codes used by the CLI. Library errors carry one of these so
// main() can translate uniformly.
enum class exit_code : int {
    ok = 0,
    internal = 1,
    parse = 2,
    schema = 3,
    missing_upstream = 4,
    transport = 5,
    gradcheck_failed = 6,
};

class error : public std::runtime_error {
public:
    error(exit_code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    exit_code code() const { return code_; }

private:
    exit_code code_;
};

// Zero-length or zero-union interval input where a ratio is undefined.
class degenerate_input_error : public error {
public:
    explicit degenerate_input_error(const std::string& what) : error(exit_code::internal, what) {}
};

class dimension_error : public error {
public:
    explicit dimension_error(const std::string& what) : error(exit_code::internal, what) {}
};

class sequence_too_long_error : public error {
public:
    explicit sequence_too_long_error(const std::string& what) : error(exit_code::internal, what) {}
};

class invalid_duration_error : public error {
public:
    explicit invalid_duration_error(const std::string& what) : error(exit_code::internal, what) {}
};

class empty_input_error : public error {
public:
    explicit empty_input_error(const std::string& what) : error(exit_code::internal, what) {}
};

// Saliency loss: the intra-video term needs at least one positive clip.
class no_positive_error : public error {
public:
    explicit no_positive_error(const std::string& what) : error(exit_code::internal, what) {}
};

// JSON/JSONL syntax problems; message carries the line number.
class parse_error : public error {
public:
    explicit parse_error(const std::string& what) : error(exit_code::parse, what) {}
};

// Structurally valid input violating the declared schema; message carries the
// field path.
class schema_error : public error {
public:
    explicit schema_error(const std::string& what) : error(exit_code::schema, what) {}
};

class missing_upstream_error : public error {
public:
    explicit missing_upstream_error(const std::string& what) : error(exit_code::missing_upstream, what) {}
};

class transport_error : public error {
public:
    explicit transport_error(const std::string& what) : error(exit_code::transport, what) {}
};

class empty_completion_error : public error {
public:
    explicit empty_completion_error(const std::string& what) : error(exit_code::transport, what) {}
};

// Weight-file loading failures, one code per failure class.
enum class weights_error_kind { missing_file, corrupt, shape_mismatch };

class weights_error : public error {
public:
    weights_error(weights_error_kind kind, const std::string& what) : error(exit_code::internal, what), kind_(kind) {}
    weights_error_kind kind() const { return kind_; }

private:
    weights_error_kind kind_;
};

} // namespace leadqa
