#pragma once
#include <stdexcept>
#include <string>

namespace spikevox {

// Named error types. Each carries a human-readable message that names the
// offending coordinate, row, or file location.
#define SPIKEVOX_ERROR(Name)                                  \
    struct Name : std::runtime_error {                        \
        explicit Name(const std::string& msg)                 \
            : std::runtime_error(std::string(#Name ": ") + msg) {} \
    }

// sparse tensors / rulebooks
SPIKEVOX_ERROR(DuplicateCoordinate);
SPIKEVOX_ERROR(ShapeMismatch);
SPIKEVOX_ERROR(OutOfBounds);
SPIKEVOX_ERROR(InvalidKernel);
SPIKEVOX_ERROR(InvalidStride);

// convolution
SPIKEVOX_ERROR(ChannelMismatch);
SPIKEVOX_ERROR(StaleRulebook);

// neurons
SPIKEVOX_ERROR(ValueOutOfRange);

// voxelizer / network
SPIKEVOX_ERROR(EmptyCloud);
SPIKEVOX_ERROR(CoordMismatch);
SPIKEVOX_ERROR(EmptyFeatures);

// training
SPIKEVOX_ERROR(NonFiniteLoss);
SPIKEVOX_ERROR(EmptyDataset);

// file parsing
SPIKEVOX_ERROR(MalformedRow);
SPIKEVOX_ERROR(BadHeader);
SPIKEVOX_ERROR(IndexOutOfRange);
SPIKEVOX_ERROR(TruncatedFile);
SPIKEVOX_ERROR(DegenerateMesh);

// profiler
SPIKEVOX_ERROR(MissingLayerStats);

#undef SPIKEVOX_ERROR

} // namespace spikevox
