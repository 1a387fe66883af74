#pragma once

#include <stdexcept>
#include <string>

namespace phishsim {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A compressor backend failed on some input.
class CompressionError : public Error {
public:
    using Error::Error;
};

/// An NCD value fell outside the admissible [0, 1 + eps] range.
class NcdRangeError : public Error {
public:
    using Error::Error;
};

/// Input could not be reduced to a tag skeleton (no elements found).
class SanitizeError : public Error {
public:
    using Error::Error;
};

/// Corpus manifest is missing, malformed, or yields no usable documents.
class CorpusError : public Error {
public:
    using Error::Error;
};

/// MICD is undefined for fewer than two prototypes.
class MicdUndefinedError : public Error {
public:
    using Error::Error;
};

/// Prototype database on disk is missing pieces or fails verification.
class CorruptDbError : public Error {
public:
    using Error::Error;
};

}  // namespace phishsim
