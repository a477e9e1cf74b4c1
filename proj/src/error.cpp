#include "trailgrade/error.hpp"

namespace trailgrade {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
        case Errc::EmptyLog: return "EmptyLog";
        case Errc::EmptyAfterSync: return "EmptyAfterSync";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::WrongChannelSet: return "WrongChannelSet";
        case Errc::MismatchedStart: return "MismatchedStart";
        case Errc::MalformedManifest: return "MalformedManifest";
        case Errc::MalformedXml: return "MalformedXml";
        case Errc::DuplicateWayId: return "DuplicateWayId";
        case Errc::UnknownGrade: return "UnknownGrade";
        case Errc::InvalidInterval: return "InvalidInterval";
        case Errc::SessionTooShort: return "SessionTooShort";
        case Errc::OutOfRange: return "OutOfRange";
        case Errc::EmptyClass: return "EmptyClass";
        case Errc::CorruptArchive: return "CorruptArchive";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::DegenerateBatch: return "DegenerateBatch";
        case Errc::LabelOutOfRange: return "LabelOutOfRange";
        case Errc::KernelTooLong: return "KernelTooLong";
        case Errc::StaleCache: return "StaleCache";
        case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::EmptyBatch: return "EmptyBatch";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::NoUsableSessions: return "NoUsableSessions";
        case Errc::EmptyHistory: return "EmptyHistory";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace trailgrade
