#pragma once

#include <stdexcept>
#include <string>

namespace epf {

// Root of every error raised by the library. Each subclass names one failure
// mode so callers can catch exactly what they are able to handle.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define EPF_DEFINE_ERROR(Name)              \
    class Name : public Error {             \
    public:                                 \
        using Error::Error;                 \
    }

// market data
EPF_DEFINE_ERROR(NetworkUnavailable);
EPF_DEFINE_ERROR(IntegrityError);
EPF_DEFINE_ERROR(RangeError);
EPF_DEFINE_ERROR(SpecError);
EPF_DEFINE_ERROR(EmptySeries);
EPF_DEFINE_ERROR(FormatError);

// pipeline
EPF_DEFINE_ERROR(AlignmentError);
EPF_DEFINE_ERROR(SegmentTooShort);

// models
EPF_DEFINE_ERROR(ConfigError);
EPF_DEFINE_ERROR(ShapeError);
EPF_DEFINE_ERROR(NonFiniteOutput);

// training
EPF_DEFINE_ERROR(DivergenceError);
EPF_DEFINE_ERROR(EmptyDataset);
EPF_DEFINE_ERROR(BudgetZero);

// evaluation
EPF_DEFINE_ERROR(SeriesTooShort);
EPF_DEFINE_ERROR(ZeroBenchmark);
EPF_DEFINE_ERROR(EmptyDump);
EPF_DEFINE_ERROR(HorizonTooShort);

// reporting
EPF_DEFINE_ERROR(NothingToReport);

#undef EPF_DEFINE_ERROR

}  // namespace epf
