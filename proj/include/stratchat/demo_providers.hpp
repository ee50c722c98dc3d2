#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "stratchat/mock_provider.hpp"
#include "stratchat/strategy_pool.hpp"

// Deterministic stand-ins for every provider role. Replies depend only on the
// request content, so runs over them are reproducible byte for byte. They are
// crude on purpose: enough structure for the metrics to have something to
// measure, nothing more.
namespace stratchat {

namespace roles {
inline constexpr const char* kStrategyProvider = "strategy_provider";
inline constexpr const char* kGenerator = "generator";
inline constexpr const char* kBaselineGenerator = "baseline_generator";
inline constexpr const char* kExtractor = "extractor";
inline constexpr const char* kAnnotator = "annotator";
inline constexpr const char* kJudge = "judge";
// Twin profiles use "twin:<id>".
inline constexpr const char* kTwinPrefix = "twin:";
}  // namespace roles

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);

// Strategy provider, generators, extractor, annotator and judge by role; any
// other role answers as a twin.
void install_demo_providers(MockTransport& transport, const StrategyPool& pool = default_pool());

MockReply demo_strategy_provider(const StrategyPool& pool, const nlohmann::json& request);
MockReply demo_generator(const StrategyPool& pool, const nlohmann::json& request);
MockReply demo_extractor(const StrategyPool& pool, const nlohmann::json& request);
MockReply demo_annotator(const StrategyPool& pool, const nlohmann::json& request);
MockReply demo_judge(const nlohmann::json& request);
MockReply demo_twin(const nlohmann::json& request);

}  // namespace stratchat
