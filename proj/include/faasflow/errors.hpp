#pragma once

#include <stdexcept>
#include <string>

namespace faasflow {

// Failure of the simulated storage backend (I/O, bad key, ...).
class StoreError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Object or bucket does not exist.
class NotFoundError : public StoreError {
public:
  using StoreError::StoreError;
};

// Byte-range request outside the object bounds. Never clamped.
class RangeError : public StoreError {
public:
  using StoreError::StoreError;
};

// Malformed input data: FASTA/FASTQ structure, TSV rows, plan tables.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or operation parameter.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Pipeline-level failure: failed stage, missing partial output,
// ordering violation, internal consistency bug.
class PipelineError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace faasflow
