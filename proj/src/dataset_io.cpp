#include "aloe/dataset_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace aloe {

using nlohmann::json;

namespace {

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

json to_json(const State& state) {
  return json{{"obs", vector_json(state.obs)}, {"task_id", state.task_id}};
}

State state_from_json(const json& j) {
  State s;
  s.obs = vector_from_json(j.at("obs"));
  s.task_id = j.at("task_id").get<int>();
  return s;
}

json to_json(const TransitionSegment& seg) {
  json rows = json::array();
  for (int t = 0; t < seg.chunk.horizon(); ++t) {
    rows.push_back(vector_json(seg.chunk.actions.row(t).transpose()));
  }
  return json{{"state", to_json(seg.state)},
              {"chunk", {{"actions", rows}, {"valid_len", seg.chunk.valid_len}}},
              {"rewards", seg.rewards},
              {"next_state", to_json(seg.next_state)},
              {"terminated", seg.terminated},
              {"success", seg.success},
              {"handover", seg.handover},
              {"source", to_string(seg.source)},
              {"episode", seg.episode},
              {"start_step", seg.start_step},
              {"iteration", seg.iteration}};
}

TransitionSegment segment_from_json(const json& j) {
  TransitionSegment seg;
  seg.state = state_from_json(j.at("state"));
  const json& rows = j.at("chunk").at("actions");
  if (rows.empty()) throw std::invalid_argument("segment record has an empty chunk");
  Matrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows[0].size()) throw std::invalid_argument("ragged chunk rows");
    for (std::size_t k = 0; k < rows[t].size(); ++k) {
      a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = rows[t][k].get<double>();
    }
  }
  seg.chunk = ActionChunk(std::move(a), j.at("chunk").at("valid_len").get<int>());
  seg.rewards = j.at("rewards").get<std::vector<double>>();
  seg.next_state = state_from_json(j.at("next_state"));
  seg.terminated = j.at("terminated").get<bool>();
  seg.success = j.at("success").get<bool>();
  seg.handover = j.value("handover", false);
  seg.source = source_from_string(j.at("source").get<std::string>());
  seg.episode = j.value("episode", std::int64_t{-1});
  seg.start_step = j.value("start_step", 0);
  seg.iteration = j.value("iteration", 0);
  seg.validate();
  return seg;
}

void write_segments_jsonl(std::ostream& out, const std::vector<TransitionSegment>& segments) {
  for (const auto& seg : segments) out << to_json(seg).dump() << '\n';
}

void write_segments_jsonl(const std::filesystem::path& path,
                          const std::vector<TransitionSegment>& segments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_segments_jsonl(out, segments);
}

std::vector<TransitionSegment> read_segments_jsonl(std::istream& in) {
  std::vector<TransitionSegment> segments;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      segments.push_back(segment_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return segments;
}

std::vector<TransitionSegment> read_segments_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_segments_jsonl(in);
}

}  // namespace aloe
