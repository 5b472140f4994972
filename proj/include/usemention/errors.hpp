#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace usemention {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (backend, prompt spec, CLI).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed input data: corpus records, verdict logs, manifests.
class DataError : public Error
{
public:
    using Error::Error;
};

class TransportError : public Error
{
public:
    TransportError(const std::string& what, int attempts)
        : Error(what), attempt_count(attempts) {}
    int attempt_count;
};

class ProtocolError : public Error
{
public:
    ProtocolError(const std::string& what, int status_code, std::string excerpt)
        : Error(what), status(status_code), body_excerpt(std::move(excerpt)) {}
    int status;
    std::string body_excerpt;
};

class TemplateError : public Error
{
public:
    using Error::Error;
};

class EmptyReportError : public Error
{
public:
    using Error::Error;
};

class UndefinedDeltaError : public Error
{
public:
    using Error::Error;
};

class DegenerateTableError : public Error
{
public:
    using Error::Error;
};

class AlignmentError : public Error
{
public:
    AlignmentError(const std::string& what, std::vector<std::string> orphan_ids)
        : Error(what), orphans(std::move(orphan_ids)) {}
    std::vector<std::string> orphans;
};

} // namespace usemention
