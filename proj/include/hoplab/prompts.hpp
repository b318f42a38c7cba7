#pragma once

#include <map>
#include <string>

namespace hoplab::prompts {

// System prompts for the controller roles.
extern const char* const kPlannerSystem;
extern const char* const kComposerSystem;
extern const char* const kPartialAnswerSystem;

// Regime prompts.
extern const char* const kNoContextSystem;
extern const char* const kGoldContextSystem;

// Verifier and auditor prompts. The final auditor is a template carrying
// {COVERAGE_THRESHOLD} and {SUFFICIENCY_THRESHOLD} placeholders.
extern const char* const kVerifierSystem;
extern const char* const kCoverageAuditorSystem;
extern const char* const kQueryAuditorSystem;
extern const char* const kFinalAuditorSystem;

/// name -> prompt text for every shipped prompt.
std::map<std::string, std::string> all();

/// name -> sha256 of the template text. These are what the run manifest pins.
std::map<std::string, std::string> hashes();

/// Replaces {KEY} placeholders in a template.
std::string instantiate(std::string text, const std::map<std::string, std::string>& values);

} // namespace hoplab::prompts
