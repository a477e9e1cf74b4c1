#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trailgrade {

enum class Errc {
    // ingest
    MalformedLine,
    NonMonotonicTimestamp,
    EmptyLog,
    EmptyAfterSync,
    TooFewSamples,
    WrongChannelSet,
    MismatchedStart,
    MalformedManifest,
    // labeling
    MalformedXml,
    DuplicateWayId,
    UnknownGrade,
    InvalidInterval,
    // dataset
    SessionTooShort,
    OutOfRange,
    EmptyClass,
    CorruptArchive,
    // nn
    ShapeMismatch,
    DegenerateBatch,
    LabelOutOfRange,
    KernelTooLong,
    StaleCache,
    CorruptCheckpoint,
    VersionMismatch,
    // training / experiments
    EmptyBatch,
    EmptyDataset,
    NonFiniteLoss,
    InvalidSpec,
    NoUsableSessions,
    EmptyHistory,
    // generic
    InvalidArgument,
    Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace trailgrade
