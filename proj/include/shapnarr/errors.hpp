#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shapnarr {

enum class ErrorCode {
  // core-model
  SchemaError,
  EmptyTable,
  DuplicateFeature,
  NTooLarge,
  // prompt-forge
  MissingDescription,
  EmptyFeedback,
  EmptyNarrative,
  InvalidPrompt,
  // llm-gateway
  AuthError,
  RateLimited,
  ProviderError,
  Timeout,
  TransientError,
  FixtureMissing,
  DuplicateFixture,
  UnknownModel,
  EmptyResponse,
  // evaluator
  ParseError,
  SignDomainError,
  NonNumericValue,
  // critic
  TableMismatch,
  // ensemble
  PanelTooSmall,
  // metrics
  EmptyBatch,
  MixedN,
  EmptyInput,
  // simlab
  UnknownFeature,
  NotTemplated,
  InvalidPlan,
  // orchestrator / cli
  ConfigError,
  IoError,
  RunExists,
  InvalidCategory,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::DuplicateFeature: return "DuplicateFeature";
    case ErrorCode::NTooLarge: return "NTooLarge";
    case ErrorCode::MissingDescription: return "MissingDescription";
    case ErrorCode::EmptyFeedback: return "EmptyFeedback";
    case ErrorCode::EmptyNarrative: return "EmptyNarrative";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransientError: return "TransientError";
    case ErrorCode::FixtureMissing: return "FixtureMissing";
    case ErrorCode::DuplicateFixture: return "DuplicateFixture";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SignDomainError: return "SignDomainError";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::TableMismatch: return "TableMismatch";
    case ErrorCode::PanelTooSmall: return "PanelTooSmall";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::MixedN: return "MixedN";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownFeature: return "UnknownFeature";
    case ErrorCode::NotTemplated: return "NotTemplated";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RunExists: return "RunExists";
    case ErrorCode::InvalidCategory: return "InvalidCategory";
  }
  return "Unknown";
}

// Every failure the library raises. `code` is the stable discriminator,
// `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal diagnostics (re-sorted rows, repaired ranks, skipped instructions...).
struct Warning {
  std::string code;
  std::string message;

  bool operator==(const Warning&) const = default;
};

using Warnings = std::vector<Warning>;

}  // namespace shapnarr
