#include "chr/error.hpp"

namespace chr {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyList: return "EmptyList";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::TooFewOptions: return "TooFewOptions";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::BackendResponse: return "BackendResponse";
    case Errc::EmbedderFailure: return "EmbedderFailure";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::UnknownDocId: return "UnknownDocId";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoQualifyingCases: return "NoQualifyingCases";
    case Errc::UnknownItemId: return "UnknownItemId";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidAnswerKey: return "InvalidAnswerKey";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::NormDrift: return "NormDrift";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace chr
