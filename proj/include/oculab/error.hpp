#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oculab {

/// Base class for every domain failure raised by the library. The control
/// plane maps each subclass onto a CLI exit code or an HTTP status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

/// Raised by config validation; carries every offending field name.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> fields)
        : Error(describe(fields)), fields_(std::move(fields)) {}
    ConfigError(std::vector<std::string> fields, const std::string& what)
        : Error(what), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    static std::string describe(const std::vector<std::string>& fields) {
        std::string msg = "invalid configuration:";
        for (const auto& f : fields) msg += " " + f;
        return msg;
    }
    std::vector<std::string> fields_;
};

class StreamOrderError : public Error {
public:
    using Error::Error;
};

class IncompleteSessionError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ReferentialError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

/// Adding an edge would close a cycle; `path` lists the cycle's nodes in
/// order, starting and ending at the same node.
class CycleError : public Error {
public:
    explicit CycleError(std::vector<std::string> path)
        : Error(describe(path)), path_(std::move(path)) {}
    const std::vector<std::string>& path() const noexcept { return path_; }

private:
    static std::string describe(const std::vector<std::string>& path) {
        std::string msg = "dependency cycle:";
        for (std::size_t i = 0; i < path.size(); ++i) msg += (i ? " -> " : " ") + path[i];
        return msg;
    }
    std::vector<std::string> path_;
};

/// A learning-path node cannot be completed yet.
class LockedError : public Error {
public:
    LockedError(std::string node, std::vector<std::string> missing)
        : Error(describe(node, missing)), node_(std::move(node)), missing_(std::move(missing)) {}
    const std::string& node() const noexcept { return node_; }
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    static std::string describe(const std::string& node, const std::vector<std::string>& missing) {
        std::string msg = "'" + node + "' is locked; missing prerequisites:";
        for (const auto& m : missing) msg += " " + m;
        return msg;
    }
    std::string node_;
    std::vector<std::string> missing_;
};

class SizeError : public Error {
public:
    using Error::Error;
};

}  // namespace oculab
