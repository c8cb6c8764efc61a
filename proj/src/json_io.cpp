#include "flowglyph/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "flowglyph/error.hpp"

namespace flowglyph {

namespace {

Json range_json(const IntRange& r) { return Json::array({r.min, r.max}); }

IntRange range_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::InvalidProfile, "integer range must be [min, max]");
  return IntRange{j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

Json lognormal_json(const LogNormal& m) { return Json{{"mu", m.mu}, {"sigma", m.sigma}}; }

LogNormal lognormal_from(const Json& j, LogNormal base) {
  if (j.contains("mu")) base.mu = j.at("mu").get<double>();
  if (j.contains("median")) base.mu = std::log(j.at("median").get<double>());
  if (j.contains("sigma")) base.sigma = j.at("sigma").get<double>();
  return base;
}

template <typename T>
void take(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

Json to_json(const Session& s) {
  return Json{{"client_ip", format_ipv4(s.client_ip)},
              {"server_ip", format_ipv4(s.server_ip)},
              {"client_port", s.client_port},
              {"server_port", s.server_port},
              {"first_ts", s.first_ts},
              {"last_ts", s.last_ts},
              {"up_app_bytes", s.up_app_bytes},
              {"down_app_bytes", s.down_app_bytes},
              {"frame_count", s.frame_count},
              {"tls_status", std::string(to_string(s.tls_status))}};
}

Json to_json(const Triplet& t) {
  return Json{{"client_ip", format_ipv4(t.client_ip)},
              {"server_ip", format_ipv4(t.server_ip)},
              {"server_port", t.server_port}};
}

Json to_json(const FeatureSet& fs) {
  return Json{{"group_ref", to_json(fs.group_ref)},
              {"first_ts_seq", fs.first_ts_seq},
              {"intervals", fs.intervals},
              {"up_bytes", fs.up_bytes},
              {"down_bytes", fs.down_bytes},
              {"overlapped", fs.overlapped}};
}

FeatureSet feature_set_from_json(const Json& j) {
  try {
    FeatureSet fs;
    const Json& ref = j.at("group_ref");
    fs.group_ref.client_ip = parse_ipv4(ref.at("client_ip").get<std::string>());
    fs.group_ref.server_ip = parse_ipv4(ref.at("server_ip").get<std::string>());
    fs.group_ref.server_port = ref.at("server_port").get<std::uint16_t>();
    fs.first_ts_seq = j.at("first_ts_seq").get<std::vector<double>>();
    fs.intervals = j.at("intervals").get<std::vector<double>>();
    fs.up_bytes = j.at("up_bytes").get<std::vector<std::uint64_t>>();
    fs.down_bytes = j.at("down_bytes").get<std::vector<std::uint64_t>>();
    fs.overlapped = j.value("overlapped", false);
    const std::size_t n = fs.first_ts_seq.size();
    if (fs.up_bytes.size() != n || fs.down_bytes.size() != n || fs.intervals.size() + 1 != std::max<std::size_t>(n, 1)) {
      throw Error(ErrorKind::MalformedInput, "feature set lists have inconsistent lengths");
    }
    return fs;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("malformed feature set: ") + e.what());
  }
}

Json to_json(const ClassProfile& p) {
  Json interval;
  if (p.interval_model.kind == IntervalModel::Kind::Periodic) {
    interval = Json{{"kind", "periodic"}, {"mean", p.interval_model.mean}, {"jitter", p.interval_model.jitter}};
  } else {
    interval = Json{{"kind", "bursty"}, {"burst_size", range_json(p.interval_model.burst_size)}, {"gap", p.interval_model.gap}};
  }
  return Json{{"name", p.name},
              {"sessions_per_group", range_json(p.sessions_per_group)},
              {"interval_model", interval},
              {"up_bytes_model", lognormal_json(p.up_bytes_model)},
              {"down_bytes_model", lognormal_json(p.down_bytes_model)},
              {"records_per_session", range_json(p.records_per_session)},
              {"server_port", p.server_port},
              {"snap_payload", p.snap_payload}};
}

ClassProfile profile_from_json(const Json& j, const ClassProfile& base) {
  try {
    ClassProfile p = base;
    take(j, "name", p.name);
    if (j.contains("sessions_per_group")) p.sessions_per_group = range_from(j.at("sessions_per_group"));
    if (j.contains("records_per_session")) p.records_per_session = range_from(j.at("records_per_session"));
    if (j.contains("up_bytes_model")) p.up_bytes_model = lognormal_from(j.at("up_bytes_model"), p.up_bytes_model);
    if (j.contains("down_bytes_model")) p.down_bytes_model = lognormal_from(j.at("down_bytes_model"), p.down_bytes_model);
    take(j, "server_port", p.server_port);
    take(j, "snap_payload", p.snap_payload);
    if (j.contains("interval_model")) {
      const Json& m = j.at("interval_model");
      if (m.contains("kind")) {
        const auto kind = m.at("kind").get<std::string>();
        if (kind == "periodic") {
          p.interval_model.kind = IntervalModel::Kind::Periodic;
        } else if (kind == "bursty") {
          p.interval_model.kind = IntervalModel::Kind::Bursty;
        } else {
          throw Error(ErrorKind::InvalidProfile, "interval_model kind must be periodic or bursty");
        }
      }
      take(m, "mean", p.interval_model.mean);
      take(m, "jitter", p.interval_model.jitter);
      take(m, "gap", p.interval_model.gap);
      if (m.contains("burst_size")) p.interval_model.burst_size = range_from(m.at("burst_size"));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidProfile, std::string("malformed profile: ") + e.what());
  }
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  try {
    DatasetSpec spec;
    take(j, "groups_per_class", spec.groups_per_class);
    take(j, "seed", spec.seed);
    take(j, "output_dir", spec.output_dir);
    if (j.contains("profiles")) {
      for (const Json& entry : j.at("profiles")) {
        if (entry.is_string()) {
          spec.profiles.push_back(default_profile(entry.get<std::string>()));
        } else {
          const auto name = entry.at("name").get<std::string>();
          bool known = false;
          for (const auto& n : kDefaultProfileNames) known = known || n == name;
          ClassProfile base;
          if (known) {
            base = default_profile(name);
          } else {
            base.name = name;
          }
          spec.profiles.push_back(profile_from_json(entry, base));
        }
      }
    } else {
      for (const auto& n : kDefaultProfileNames) spec.profiles.push_back(default_profile(n));
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidProfile, std::string("malformed dataset spec: ") + e.what());
  }
}

Json to_json(const cnn::TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedInput, "'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<Json> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
  std::vector<Json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedInput, path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_json_lines(const std::string& path, const std::vector<Json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create '" + path + "'");
  for (const Json& j : lines) out << j.dump() << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

}  // namespace flowglyph
