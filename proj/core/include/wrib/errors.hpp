#ifndef WRIB_ERRORS_HPP
#define WRIB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wrib {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define WRIB_ERROR_TYPE(name) \
    struct name : Error {     \
        using Error::Error;   \
    };

// data pipeline
WRIB_ERROR_TYPE(MissingDirectory)
WRIB_ERROR_TYPE(EmptyDataset)
WRIB_ERROR_TYPE(ImageTooSmall)
WRIB_ERROR_TYPE(InsufficientCandidates)
WRIB_ERROR_TYPE(BadImage)

// model shapes
WRIB_ERROR_TYPE(ShapeMismatch)
WRIB_ERROR_TYPE(IndivisibleWidth)
WRIB_ERROR_TYPE(PatchTooLarge)
WRIB_ERROR_TYPE(ChannelMismatch)
WRIB_ERROR_TYPE(EmptyKeys)

// losses / adversarial
WRIB_ERROR_TYPE(InvalidWidth)
WRIB_ERROR_TYPE(EmptyBatch)

// training / checkpointing
WRIB_ERROR_TYPE(StageBatchMismatch)
WRIB_ERROR_TYPE(MissingSRCheckpoint)
WRIB_ERROR_TYPE(CorruptCheckpoint)
WRIB_ERROR_TYPE(VersionMismatch)
WRIB_ERROR_TYPE(BadCheckpoint)
WRIB_ERROR_TYPE(BadConfig)

// evaluation
WRIB_ERROR_TYPE(EmptyInput)
WRIB_ERROR_TYPE(DegenerateInput)
WRIB_ERROR_TYPE(SubsetTooLarge)

#undef WRIB_ERROR_TYPE

} // namespace wrib

#endif // WRIB_ERRORS_HPP
