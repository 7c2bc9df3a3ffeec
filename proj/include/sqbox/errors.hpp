#pragma once

#include <stdexcept>
#include <string>

namespace sqbox {

// Base class for all validation failures raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SQBOX_DEFINE_ERROR(Name)                                     \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

SQBOX_DEFINE_ERROR(DeltaInvalid);       // delta outside (0, 1)
SQBOX_DEFINE_ERROR(DeltaTooSmall);      // delta < 1/(n_cal + 1)
SQBOX_DEFINE_ERROR(EmptyScores);
SQBOX_DEFINE_ERROR(AllScalesZero);
SQBOX_DEFINE_ERROR(BadSplit);
SQBOX_DEFINE_ERROR(DimensionMismatch);
SQBOX_DEFINE_ERROR(LengthMismatch);
SQBOX_DEFINE_ERROR(InsufficientData);
SQBOX_DEFINE_ERROR(DegenerateFeatures);
SQBOX_DEFINE_ERROR(InvalidCorrelation);
SQBOX_DEFINE_ERROR(InfeasibleAction);
SQBOX_DEFINE_ERROR(NoFeasibleAction);
SQBOX_DEFINE_ERROR(InvalidConfig);
SQBOX_DEFINE_ERROR(IoError);

#undef SQBOX_DEFINE_ERROR

}  // namespace sqbox
