#pragma once

#include <stdexcept>
#include <string>

namespace latentshift {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension mismatches between matrices, vectors or records.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Non-finite values, failed convergence, undefined numeric results.
class NumericError : public Error {
public:
    using Error::Error;
};

// Precondition violations on inputs (non-symmetric matrix, zero std, bad ICV, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// File-level ingestion problems: missing file, header mismatch, unparseable cell.
class IngestError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Stage orchestration failures: missing upstream artifacts, stale input hashes.
class PipelineError : public Error {
public:
    using Error::Error;
};

// Undefined evaluation metrics (e.g. AUC on a single-class cohort).
class MetricError : public Error {
public:
    using Error::Error;
};

} // namespace latentshift
