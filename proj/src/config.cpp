#include "locfuse/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "locfuse/cli.hpp"
#include "locfuse/errors.hpp"

namespace locfuse {

using nlohmann::json;

namespace {

// Object reader that records which keys were consumed so that leftovers can
// be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ParseError(where() + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.count(key)) throw ParseError("unknown key '" + key_path(key) + "'");
    }
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ParseError("key '" + key_path(key) + "' has the wrong type");
      }
    }
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ParseError("key '" + key_path(key) + "' must be a number");
      out = v->get<double>();
    }
  }

  void get(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ParseError("key '" + key_path(key) + "' must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void get(const std::string& key, Point3& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3 || !(*v)[0].is_number() || !(*v)[1].is_number() || !(*v)[2].is_number()) {
        throw ParseError("key '" + key_path(key) + "' must be an array of three numbers");
      }
      out = Point3((*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>());
    }
  }

  void get(const std::string& key, ZBand& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        throw ParseError("key '" + key_path(key) + "' must be an array [lo, hi]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    if (const json* v = find(key)) {
      Reader sub(*v, key_path(key));
      fn(sub);
    }
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<LayoutKind> kLayoutNames[] = {
    {LayoutKind::collinear, "collinear"}, {LayoutKind::noncollinear, "noncollinear"}, {LayoutKind::random, "random"}};
constexpr EnumName<MeasurementSet> kSetNames[] = {{MeasurementSet::toa, "toa"},
                                                  {MeasurementSet::tdoa, "tdoa"},
                                                  {MeasurementSet::aoa, "aoa"},
                                                  {MeasurementSet::toa_aoa, "toa+aoa"},
                                                  {MeasurementSet::tdoa_aoa, "tdoa+aoa"}};
constexpr EnumName<SynthesisMode> kModeNames[] = {{SynthesisMode::statistical, "statistical"},
                                                  {SynthesisMode::signal, "signal"}};
constexpr EnumName<OrientationPolicy> kOrientationNames[] = {{OrientationPolicy::identity, "identity"},
                                                             {OrientationPolicy::face_center, "face_center"}};

template <typename Enum, std::size_t N>
const char* name_of(const EnumName<Enum> (&table)[N], Enum v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "unknown";
}

template <typename Enum, std::size_t N>
void read_enum(Reader& r, const std::string& key, const EnumName<Enum> (&table)[N], Enum& out) {
  if (const json* v = r.find(key)) {
    if (v->is_string()) {
      const std::string s = v->get<std::string>();
      for (const auto& e : table) {
        if (s == e.name) {
          out = e.value;
          return;
        }
      }
    }
    std::string allowed;
    for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
    throw ParseError("key '" + r.key_path(key) + "' has value " + v->dump() + ", expected one of: " + allowed);
  }
}

json point(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }
json band(const ZBand& b) { return json::array({b.lo, b.hi}); }
json box(const Box& b) { return json{{"min", point(b.min_corner)}, {"max", point(b.max_corner)}}; }

void read_box(Reader& r, Box& b) {
  r.get("min", b.min_corner);
  r.get("max", b.max_corner);
}

std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json obstacles = json::array();
  for (const Box& o : c.scene.obstacles) obstacles.push_back(box(o));
  json signal{
      {"array", {{"rows", c.signal.array.rows}, {"cols", c.signal.array.cols}, {"element_spacing", c.signal.array.element_spacing}}},
      {"codebook_half_fov_deg", c.signal.codebook_half_fov_deg},
      {"codebook_step_deg", c.signal.codebook_step_deg},
      {"ofdm",
       {{"subcarrier_spacing_hz", c.signal.ofdm.subcarrier_spacing_hz},
        {"num_subcarriers", c.signal.ofdm.num_subcarriers},
        {"carrier_freq_hz", c.signal.ofdm.carrier_freq_hz}}},
      {"noise_figure_db", c.signal.noise_figure_db},
      {"rsrp_processing_gain_db", c.signal.rsrp_processing_gain_db},
      {"snr_db", c.signal.snr_db ? json(*c.signal.snr_db) : json(nullptr)}};
  return json{
      {"seed", c.seed},
      {"monte_carlo_runs", c.monte_carlo_runs},
      {"duration_s", c.mobility.duration_s},
      {"epoch_dt_s", c.mobility.epoch_dt_s},
      {"burn_in_s", c.burn_in_s},
      {"scene",
       {{"bounds", box(c.scene.bounds)},
        {"obstacles", obstacles},
        {"carrier_freq_hz", c.scene.carrier_freq_hz},
        {"tx_power_dbm", c.scene.tx_power_dbm},
        {"rx_sensitivity_dbm", c.scene.rx_sensitivity_dbm},
        {"rx_array_gain_db", c.scene.rx_array_gain_db}}},
      {"layout",
       {{"kind", name_of(kLayoutNames, c.layout)},
        {"anchors", c.anchors},
        {"z_band", band(c.anchor_z_band)},
        {"orientation", name_of(kOrientationNames, c.orientation)}}},
      {"targets", c.targets},
      {"mobility",
       {{"speed_min", c.mobility.speed_min},
        {"speed_max", c.mobility.speed_max},
        {"z_band", band(c.mobility.z_band)},
        {"pause_s", c.mobility.pause_s}}},
      {"measurement_set", name_of(kSetNames, c.measurement_set)},
      {"mode", name_of(kModeNames, c.mode)},
      {"noise", {{"sigma_delay_m", c.noise.sigma_delay_m}, {"sigma_angle_deg", c.noise.sigma_angle_deg}}},
      {"signal", signal},
      {"process", {{"target_jerk_psd", c.process.target_jerk_psd}, {"anchor_jitter", c.process.anchor_jitter}}},
      {"kinematic_prior",
       {{"velocity_sigma", c.kinematics.velocity_sigma}, {"acceleration_sigma", c.kinematics.acceleration_sigma}}},
      {"anchor_prior_sigma", c.anchor_prior_sigma},
      {"gate_prob", c.gate_prob},
      {"sweep", {{"anchors", c.sweep.anchors}, {"targets", c.sweep.targets}, {"runs", c.sweep.runs}}}};
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  {
    Reader r(doc, "");
    if (const json* v = r.find("seed")) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        throw ParseError("key 'seed' must be a non-negative integer");
      }
      c.seed = v->get<std::uint64_t>();
    }
    r.get("monte_carlo_runs", c.monte_carlo_runs);
    r.get("duration_s", c.mobility.duration_s);
    r.get("epoch_dt_s", c.mobility.epoch_dt_s);
    r.get("burn_in_s", c.burn_in_s);
    r.object("scene", [&](Reader& s) {
      s.object("bounds", [&](Reader& b) { read_box(b, c.scene.bounds); });
      if (const json* obs = s.find("obstacles")) {
        if (!obs->is_array()) throw ParseError("key 'scene.obstacles' must be an array");
        c.scene.obstacles.clear();
        for (std::size_t i = 0; i < obs->size(); ++i) {
          Box b;
          Reader o((*obs)[i], "scene.obstacles[" + std::to_string(i) + "]");
          read_box(o, b);
          c.scene.obstacles.push_back(b);
        }
      }
      s.get("carrier_freq_hz", c.scene.carrier_freq_hz);
      s.get("tx_power_dbm", c.scene.tx_power_dbm);
      s.get("rx_sensitivity_dbm", c.scene.rx_sensitivity_dbm);
      s.get("rx_array_gain_db", c.scene.rx_array_gain_db);
    });
    r.object("layout", [&](Reader& l) {
      read_enum(l, "kind", kLayoutNames, c.layout);
      l.get("anchors", c.anchors);
      l.get("z_band", c.anchor_z_band);
      read_enum(l, "orientation", kOrientationNames, c.orientation);
    });
    r.get("targets", c.targets);
    r.object("mobility", [&](Reader& m) {
      m.get("speed_min", c.mobility.speed_min);
      m.get("speed_max", c.mobility.speed_max);
      m.get("z_band", c.mobility.z_band);
      m.get("pause_s", c.mobility.pause_s);
    });
    read_enum(r, "measurement_set", kSetNames, c.measurement_set);
    read_enum(r, "mode", kModeNames, c.mode);
    r.object("noise", [&](Reader& n) {
      n.get("sigma_delay_m", c.noise.sigma_delay_m);
      n.get("sigma_angle_deg", c.noise.sigma_angle_deg);
    });
    r.object("signal", [&](Reader& s) {
      s.object("array", [&](Reader& a) {
        std::size_t rows = static_cast<std::size_t>(c.signal.array.rows);
        std::size_t cols = static_cast<std::size_t>(c.signal.array.cols);
        a.get("rows", rows);
        a.get("cols", cols);
        c.signal.array.rows = static_cast<int>(rows);
        c.signal.array.cols = static_cast<int>(cols);
        a.get("element_spacing", c.signal.array.element_spacing);
      });
      s.get("codebook_half_fov_deg", c.signal.codebook_half_fov_deg);
      s.get("codebook_step_deg", c.signal.codebook_step_deg);
      s.object("ofdm", [&](Reader& o) {
        o.get("subcarrier_spacing_hz", c.signal.ofdm.subcarrier_spacing_hz);
        std::size_t n = static_cast<std::size_t>(c.signal.ofdm.num_subcarriers);
        o.get("num_subcarriers", n);
        c.signal.ofdm.num_subcarriers = static_cast<int>(n);
        o.get("carrier_freq_hz", c.signal.ofdm.carrier_freq_hz);
      });
      s.get("noise_figure_db", c.signal.noise_figure_db);
      s.get("rsrp_processing_gain_db", c.signal.rsrp_processing_gain_db);
      if (const json* v = s.find("snr_db")) {
        if (v->is_null()) {
          c.signal.snr_db.reset();
        } else if (v->is_number()) {
          c.signal.snr_db = v->get<double>();
        } else {
          throw ParseError("key 'signal.snr_db' must be a number or null");
        }
      }
    });
    r.object("process", [&](Reader& p) {
      p.get("target_jerk_psd", c.process.target_jerk_psd);
      p.get("anchor_jitter", c.process.anchor_jitter);
    });
    r.object("kinematic_prior", [&](Reader& k) {
      k.get("velocity_sigma", c.kinematics.velocity_sigma);
      k.get("acceleration_sigma", c.kinematics.acceleration_sigma);
    });
    r.get("anchor_prior_sigma", c.anchor_prior_sigma);
    r.get("gate_prob", c.gate_prob);
    r.object("sweep", [&](Reader& s) {
      s.get("anchors", c.sweep.anchors);
      s.get("targets", c.sweep.targets);
      s.get("runs", c.sweep.runs);
    });
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at " + line_of(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (doc.is_object() && doc.contains("format") && doc["format"] == kManifestFormat) {
    if (!doc.contains("config")) throw ParseError("manifest has no 'config' entry");
    return config_from_json(doc["config"]);
  }
  return config_from_json(doc);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace locfuse
