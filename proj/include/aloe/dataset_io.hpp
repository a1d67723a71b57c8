#pragma once

// JSON-lines persistence for transition segments: one segment per line.

#include "aloe/core.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace aloe {

nlohmann::json to_json(const State& state);
nlohmann::json to_json(const TransitionSegment& segment);
State state_from_json(const nlohmann::json& j);
TransitionSegment segment_from_json(const nlohmann::json& j);

void write_segments_jsonl(std::ostream& out, const std::vector<TransitionSegment>& segments);
void write_segments_jsonl(const std::filesystem::path& path,
                          const std::vector<TransitionSegment>& segments);
std::vector<TransitionSegment> read_segments_jsonl(std::istream& in);
std::vector<TransitionSegment> read_segments_jsonl(const std::filesystem::path& path);

}  // namespace aloe
