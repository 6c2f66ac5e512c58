#pragma once

#include <stdexcept>

namespace nrvq {

// Base class for every typed failure raised by the library. All failures are
// loud: an operation either returns a complete result or throws, never both.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- fitting / statistics ---------------------------------------------------
class DegenerateInput final : public Error { public: using Error::Error; };
class InsufficientPatches final : public Error { public: using Error::Error; };
class DimensionMismatch final : public Error { public: using Error::Error; };
class SingularCovariance final : public Error { public: using Error::Error; };

// --- plane transforms -------------------------------------------------------
class InvalidParameter final : public Error { public: using Error::Error; };
class PlaneTooSmall final : public Error { public: using Error::Error; };
class PatchOutOfBounds final : public Error { public: using Error::Error; };
class NoPatchesFit final : public Error { public: using Error::Error; };

// --- pooling ----------------------------------------------------------------
class InvalidScore final : public Error { public: using Error::Error; };
class EmptySeries final : public Error { public: using Error::Error; };

// --- stream ingestion -------------------------------------------------------
class BadSignature final : public Error { public: using Error::Error; };
class MissingDimension final : public Error { public: using Error::Error; };
class UnsupportedChroma final : public Error { public: using Error::Error; };
class UnsupportedBitDepth final : public Error { public: using Error::Error; };
class BadFrameMarker final : public Error { public: using Error::Error; };
class TruncatedFrame final : public Error { public: using Error::Error; };
class SizeMismatch final : public Error { public: using Error::Error; };
class BadMagic final : public Error { public: using Error::Error; };
class UnsupportedMaxval final : public Error { public: using Error::Error; };

// --- analysis / reporting ---------------------------------------------------
class DuplicatePoint final : public Error { public: using Error::Error; };
class TooFewPoints final : public Error { public: using Error::Error; };
class InsufficientOverlap final : public Error { public: using Error::Error; };
class IoFailure final : public Error { public: using Error::Error; };

// --- persisted artifacts ----------------------------------------------------
class ModelFormatError final : public Error { public: using Error::Error; };
class ManifestError final : public Error { public: using Error::Error; };

}  // namespace nrvq
