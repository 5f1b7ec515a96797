#include "sea/dataset.hpp"

#include "sea/numerics/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace sea {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_gaze(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 3);
  return std::string(buf, ptr);
}

fs::path find_frame(const fs::path& dir, std::int64_t id) {
  for (const char* ext : {".pgm", ".png"}) {
    auto p = dir / (std::to_string(id) + ext);
    if (fs::exists(p)) return p;
  }
  return {};
}

json geometry_to_json(const ScreenGeometry& g) {
  return {{"screen_width_cm", g.screen_width_cm},
          {"screen_height_cm", g.screen_height_cm},
          {"screen_width_px", g.screen_width_px},
          {"screen_height_px", g.screen_height_px},
          {"viewing_distance_cm", g.viewing_distance_cm}};
}

ScreenGeometry geometry_from_json(const json& j) {
  ScreenGeometry g;
  g.screen_width_cm = j.at("screen_width_cm").get<double>();
  g.screen_height_cm = j.at("screen_height_cm").get<double>();
  g.screen_width_px = j.at("screen_width_px").get<double>();
  g.screen_height_px = j.at("screen_height_px").get<double>();
  g.viewing_distance_cm = j.at("viewing_distance_cm").get<double>();
  g.validate();
  return g;
}

}  // namespace

Frame FrameStack::channel(int k) const {
  Frame f(kFrameSize, kFrameSize);
  Eigen::Map<RowMatrix<float>>(f.data(), 1, f.size()) = channels.row(k);
  return f;
}

double round_gaze_coordinate(double v) { return std::round(v * 1000.0) / 1000.0; }

Trial parse_trial(const fs::path& label_file, const fs::path& frame_dir,
                  const ParseOptions& options) {
  std::ifstream in(label_file);
  if (!in) throw DatasetError("cannot open label file " + label_file.string());
  Trial trial;
  trial.action_count = options.action_count;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(label_file.string() + ": empty label file");
  const auto header = split_csv_line(trim(line));
  if (header.size() != 5 || header[0] != "frame_id" || header[1] != "episode" ||
      header[2] != "score" || header[3] != "action" || header[4] != "gaze_xy")
    throw DatasetError(label_file.string() +
                       ": header must be frame_id,episode,score,action,gaze_xy");
  std::size_t row = 1;
  std::vector<std::vector<GazePoint>> raw_gaze;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto where = label_file.string() + " row " + std::to_string(row);
    const auto f = split_csv_line(line);
    if (f.size() != 5)
      throw DatasetError(where + ": expected 5 fields, got " + std::to_string(f.size()));
    TrajectoryStep step;
    if (!parse_number(trim(f[0]), step.frame_id)) throw DatasetError(where + ": bad frame_id");
    if (!parse_number(trim(f[1]), step.episode)) throw DatasetError(where + ": bad episode");
    if (!parse_number(trim(f[2]), step.score)) throw DatasetError(where + ": bad score");
    if (!parse_number(trim(f[3]), step.action)) throw DatasetError(where + ": bad action");
    if (step.action < 0 || step.action >= options.action_count)
      throw DatasetError(where + ": action " + std::to_string(step.action) +
                         " outside action set of size " + std::to_string(options.action_count));
    if (!trial.steps.empty() && step.frame_id <= trial.steps.back().frame_id)
      throw DatasetError(where + ": frame_id " + std::to_string(step.frame_id) +
                         " not strictly increasing");
    std::istringstream gs(f[4]);
    std::vector<std::string> toks;
    for (std::string t; gs >> t;) toks.push_back(t);
    if (toks.size() % 2 != 0) throw DatasetError(where + ": odd number of gaze coordinates");
    std::vector<GazePoint> pts;
    for (std::size_t k = 0; k < toks.size(); k += 2) {
      GazePoint p;
      if (toks[k] == "null" || toks[k + 1] == "null") continue;
      if (!parse_number(toks[k], p.x) || !parse_number(toks[k + 1], p.y))
        throw DatasetError(where + ": bad gaze coordinate");
      pts.push_back(p);
    }
    raw_gaze.push_back(std::move(pts));
    step.frame_path = find_frame(frame_dir, step.frame_id);
    if (step.frame_path.empty())
      throw DatasetError(where + ": missing frame file for frame_id " +
                         std::to_string(step.frame_id) + " in " + frame_dir.string());
    trial.steps.push_back(std::move(step));
  }
  if (trial.steps.empty()) throw DatasetError(label_file.string() + ": no steps");

  if (options.native_width && options.native_height) {
    trial.native_width = *options.native_width;
    trial.native_height = *options.native_height;
  } else {
    const auto first = read_image(trial.steps.front().frame_path);
    trial.native_width = first.width;
    trial.native_height = first.height;
  }
  for (std::size_t i = 0; i < trial.steps.size(); ++i) {
    for (const auto& p : raw_gaze[i]) {
      if (p.x >= 0 && p.y >= 0 && p.x < trial.native_width && p.y < trial.native_height)
        trial.steps[i].gaze_points.push_back(p);
    }
  }
  if (options.load_frames) {
    trial.frames.reserve(trial.steps.size());
    for (const auto& s : trial.steps) trial.frames.push_back(preprocess_frame(read_image(s.frame_path)));
  }
  return trial;
}

Trial load_trial_dir(const fs::path& dir, bool load_frames) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw DatasetError("missing " + (dir / "meta.json").string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw DatasetError((dir / "meta.json").string() + ": " + e.what());
  }
  ParseOptions opts;
  opts.action_count = meta.value("action_count", kAtariActionCount);
  opts.native_width = meta.at("native_width").get<int>();
  opts.native_height = meta.at("native_height").get<int>();
  opts.load_frames = load_frames;
  Trial t = parse_trial(dir / "labels.csv", dir / "frames", opts);
  t.trial_id = meta.value("trial_id", dir.filename().string());
  t.subject_id = meta.value("subject_id", std::string());
  if (meta.contains("geometry")) t.geometry = geometry_from_json(meta["geometry"]);
  if (meta.contains("phase")) {
    t.phase = meta["phase"].get<std::vector<int>>();
    if (t.phase.size() != t.steps.size())
      throw DatasetError((dir / "meta.json").string() + ": phase length does not match steps");
  }
  return t;
}

std::vector<Trial> load_dataset(const fs::path& root, bool load_frames) {
  if (!fs::is_directory(root)) throw DatasetError("dataset root " + root.string() + " not found");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("trial_", 0) == 0)
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DatasetError("no trial_* directories under " + root.string());
  std::vector<Trial> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_trial_dir(d, load_frames));
  return out;
}

std::string serialize_labels(const Trial& trial) {
  std::string s = "frame_id,episode,score,action,gaze_xy\n";
  for (const auto& st : trial.steps) {
    s += std::to_string(st.frame_id) + ',' + std::to_string(st.episode) + ',' +
         format_real(st.score) + ',' + std::to_string(st.action) + ',';
    for (std::size_t k = 0; k < st.gaze_points.size(); ++k) {
      if (k) s += ' ';
      s += format_gaze(st.gaze_points[k].x) + ' ' + format_gaze(st.gaze_points[k].y);
    }
    s += '\n';
  }
  return s;
}

void write_trial_metadata(const fs::path& dir, const Trial& trial) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    out << serialize_labels(trial);
  }
  json meta = {{"trial_id", trial.trial_id},
               {"subject_id", trial.subject_id},
               {"native_width", trial.native_width},
               {"native_height", trial.native_height},
               {"action_count", trial.action_count},
               {"geometry", geometry_to_json(trial.geometry)}};
  if (!trial.phase.empty()) meta["phase"] = trial.phase;
  std::ofstream out(dir / "meta.json", std::ios::binary);
  out << meta.dump(2) << '\n';
}

FrameStack make_frame_stack(const std::vector<Frame>& frames, std::size_t i) {
  if (i >= frames.size()) throw std::out_of_range("make_frame_stack: step index out of range");
  const Index pixels = frames[i].size();
  FrameStack s{RowMatrix<float>(kStackDepth, pixels)};
  for (int k = 0; k < kStackDepth; ++k) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i) - (kStackDepth - 1) + k;
    const auto& f = frames[static_cast<std::size_t>(std::max<std::ptrdiff_t>(src, 0))];
    s.channels.row(k) = Eigen::Map<const RowMatrix<float>>(f.data(), 1, pixels);
  }
  return s;
}

FrameStack make_frame_stack(const Trial& trial, std::size_t i) {
  if (trial.frames.size() != trial.steps.size())
    throw DatasetError("make_frame_stack: trial frames are not loaded");
  return make_frame_stack(trial.frames, i);
}

std::optional<GazePoint> last_gaze_point_84(const Trial& trial, std::size_t i) {
  const auto& pts = trial.steps.at(i).gaze_points;
  if (pts.empty()) return std::nullopt;
  return scale_gaze_point(pts.back(), trial.native_width, trial.native_height, kFrameSize,
                          kFrameSize);
}

TrialSplit split_trials(std::size_t trial_count, std::size_t train_count, std::size_t val_count,
                        std::uint64_t seed) {
  if (train_count == 0 || val_count == 0)
    throw std::invalid_argument("split_trials: counts must be positive");
  if (train_count + val_count > trial_count)
    throw std::invalid_argument("split_trials: " + std::to_string(trial_count) +
                                " trials cannot cover " + std::to_string(train_count) + "+" +
                                std::to_string(val_count));
  std::vector<std::size_t> idx(trial_count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng(seed).split("split_trials");
  rng.shuffle(std::span<std::size_t>(idx));
  TrialSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(train_count),
               idx.begin() + static_cast<std::ptrdiff_t>(train_count + val_count));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

std::size_t convert_atari_head(const fs::path& label_txt, const fs::path& frame_dir,
                               const fs::path& out_dir, int native_width, int native_height) {
  std::ifstream in(label_txt);
  if (!in) throw DatasetError("cannot open " + label_txt.string());
  std::string line;
  std::getline(in, line);  // header
  Trial trial;
  trial.trial_id = label_txt.stem().string();
  trial.native_width = native_width;
  trial.native_height = native_height;
  fs::create_directories(out_dir / "frames");
  std::size_t row = 1;
  std::int64_t index = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const auto where = label_txt.string() + " row " + std::to_string(row);
    if (f.size() < 7) throw DatasetError(where + ": expected at least 7 fields");
    TrajectoryStep step;
    step.frame_id = index;
    if (f[1] != "null" && !parse_number(f[1], step.episode)) throw DatasetError(where + ": bad episode");
    if (f[2] != "null" && !parse_number(f[2], step.score)) throw DatasetError(where + ": bad score");
    if (f[5] == "null") step.action = 0;
    else if (!parse_number(f[5], step.action)) throw DatasetError(where + ": bad action");
    // gaze_positions spill over the remaining comma-separated fields as x,y pairs
    if (!(f.size() == 7 && f[6] == "null")) {
      if ((f.size() - 6) % 2 != 0) throw DatasetError(where + ": odd number of gaze values");
      for (std::size_t k = 6; k + 1 < f.size(); k += 2) {
        GazePoint p;
        if (!parse_number(f[k], p.x) || !parse_number(f[k + 1], p.y))
          throw DatasetError(where + ": bad gaze value");
        if (p.x < 0 || p.y < 0 || p.x >= native_width || p.y >= native_height) continue;
        p.x = round_gaze_coordinate(p.x);
        p.y = round_gaze_coordinate(p.y);
        step.gaze_points.push_back(p);
      }
    }
    const auto src = frame_dir / (f[0] + ".png");
    if (!fs::exists(src)) throw DatasetError(where + ": missing frame " + src.string());
    fs::copy_file(src, out_dir / "frames" / (std::to_string(index) + ".png"),
                  fs::copy_options::overwrite_existing);
    trial.steps.push_back(std::move(step));
    ++index;
  }
  write_trial_metadata(out_dir, trial);
  return trial.steps.size();
}

}  // namespace sea
