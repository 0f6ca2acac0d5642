// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/netbank.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/text.hpp"

namespace fs = std::filesystem;

namespace sentinel {

void ModelRecord::validate() const {
  network.validate();
  if (network.config.n_objects != n_objects) {
    throw InvalidArgument("model record for N=" + std::to_string(n_objects) +
                          " holds a network for N=" + std::to_string(network.config.n_objects));
  }
  if (!meta.bounds.valid()) throw InvalidArgument("model record has invalid area bounds");
  if (meta.scale != CoordinateScale::none) {
    throw InvalidArgument("model record meta must describe unscaled area coordinates");
  }
  if (version < 1) throw InvalidArgument("model versions start at 1");
}

// ---- record file -------------------------------------------------------

namespace {

using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_fields(const std::string& line, std::string_view keyword, const std::string& source,
                       std::size_t line_no) {
  auto tokens = text::split(line);
  if (tokens.empty() || tokens[0] != keyword) {
    throw FormatError(source, line_no, "expected `" + std::string(keyword) + " ...` line");
  }
  KeyValues out;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw FormatError(source, line_no, "expected `key=value`, got `" + std::string(tokens[i]) + "`");
    }
    out.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
  }
  return out;
}

class FieldReader {
 public:
  FieldReader(KeyValues fields, std::string source, std::size_t line_no)
      : fields_(std::move(fields)), source_(std::move(source)), line_no_(line_no) {}

  const std::string& raw(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw FormatError(source_, line_no_, "missing field `" + key + "`");
    return it->second;
  }

  std::uint64_t uint(const std::string& key) const {
    auto v = text::parse_uint(raw(key));
    if (!v) throw FormatError(source_, line_no_, "invalid integer for `" + key + "`");
    return *v;
  }

  double real(const std::string& key) const {
    auto v = text::parse_double(raw(key));
    if (!v) throw FormatError(source_, line_no_, "invalid number for `" + key + "`");
    return *v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_, line_no_, what);
  }

 private:
  KeyValues fields_;
  std::string source_;
  std::size_t line_no_;
};

std::string next_line(std::istream& in, const std::string& source, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source, line_no, "unexpected end of file");
  ++line_no;
  return line;
}

std::size_t count_lines(const Network& net) {
  return 2 + 4 + net.config.hidden_size * 2 + net.config.output_size * 2;
}

}  // namespace

void write_model_record(const ModelRecord& record, std::ostream& out) {
  record.validate();
  write_network(record.network, out);
  const AreaBounds& b = record.meta.bounds;
  const TrainingProvenance& p = record.provenance;
  const TrainConfig& tc = p.train_config;
  out << "record version=" << record.version << " n_objects=" << record.n_objects << '\n';
  out << "meta bounds=" << text::format_shortest(b.min_x) << ',' << text::format_shortest(b.min_y)
      << ',' << text::format_shortest(b.max_x) << ',' << text::format_shortest(b.max_y)
      << " seed=" << record.meta.seed << '\n';
  out << "provenance dataset=" << p.dataset_id << " policy=" << to_string(p.policy)
      << " split_seed=" << p.split_seed << " learning_rate=" << text::format_precise(tc.learning_rate)
      << " momentum=" << text::format_precise(tc.momentum) << " max_epochs=" << tc.max_epochs
      << " patience=" << tc.patience
      << " min_improvement=" << text::format_precise(tc.min_improvement)
      << " shuffle_seed=" << tc.shuffle_seed
      << " stop_epoch=" << p.stop_epoch << " best_epoch=" << p.best_epoch
      << " best_validation_mse=" << text::format_precise(p.best_validation_mse) << '\n';
}

ModelRecord read_model_record(std::istream& in, const std::string& source) {
  ModelRecord record;
  record.network = read_network(in, source, false);
  std::size_t line_no = count_lines(record.network);

  std::string line = next_line(in, source, line_no);
  FieldReader rec(parse_fields(line, "record", source, line_no), source, line_no);
  record.version = rec.uint("version");
  record.n_objects = static_cast<std::size_t>(rec.uint("n_objects"));

  line = next_line(in, source, line_no);
  FieldReader meta(parse_fields(line, "meta", source, line_no), source, line_no);
  auto bounds = text::split(meta.raw("bounds"), ',');
  if (bounds.size() != 4) meta.fail("bounds must be `min_x,min_y,max_x,max_y`");
  std::array<double, 4> b{};
  for (std::size_t i = 0; i < 4; ++i) {
    auto v = text::parse_double(bounds[i]);
    if (!v) meta.fail("invalid bound");
    b[i] = *v;
  }
  record.meta.bounds = {b[0], b[1], b[2], b[3]};
  record.meta.seed = meta.uint("seed");

  line = next_line(in, source, line_no);
  FieldReader prov(parse_fields(line, "provenance", source, line_no), source, line_no);
  TrainingProvenance& p = record.provenance;
  p.dataset_id = prov.raw("dataset");
  auto policy = parse_policy(prov.raw("policy"));
  if (!policy) prov.fail("invalid policy");
  p.policy = *policy;
  p.split_seed = prov.uint("split_seed");
  p.train_config.learning_rate = prov.real("learning_rate");
  p.train_config.momentum = prov.real("momentum");
  p.train_config.max_epochs = static_cast<std::size_t>(prov.uint("max_epochs"));
  p.train_config.patience = static_cast<std::size_t>(prov.uint("patience"));
  p.train_config.min_improvement = prov.real("min_improvement");
  p.train_config.shuffle_seed = prov.uint("shuffle_seed");
  p.stop_epoch = static_cast<std::size_t>(prov.uint("stop_epoch"));
  p.best_epoch = static_cast<std::size_t>(prov.uint("best_epoch"));
  p.best_validation_mse = prov.real("best_validation_mse");

  std::string extra;
  if (std::getline(in, extra)) throw FormatError(source, line_no + 1, "trailing content after record");
  try {
    record.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(source, 0, e.what());
  }
  return record;
}

ModelRecord read_model_record(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_model_record(in, path.string());
}

// ---- training ----------------------------------------------------------

namespace {

TrainingProvenance describe(const RawDataset& raw, const PermutationPolicy& policy,
                            std::uint64_t split_seed, const TrainConfig& tc,
                            const TrainReport& report) {
  TrainingProvenance p;
  p.dataset_id = dataset_id(raw);
  p.policy = policy;
  p.split_seed = split_seed;
  p.train_config = tc;
  p.stop_epoch = report.stop_epoch;
  p.best_epoch = report.best_epoch;
  p.best_validation_mse = report.best_validation_mse;
  return p;
}

DatasetMeta input_meta(const RawDataset& raw) {
  DatasetMeta meta = raw.meta;
  meta.scale = CoordinateScale::none;
  return meta;
}

}  // namespace

ModelRecord train_model(const RawDataset& raw, const TrainOptions& options) {
  if (raw.meta.scale != CoordinateScale::none) {
    throw InvalidArgument("bank datasets must hold unscaled area coordinates");
  }
  auto normalized = normalize(raw, options.policy);
  auto assignment = split(normalized, options.split_seed);
  auto net = init(NetworkConfig::for_objects(raw.n_objects, options.hidden_size), options.init_seed);
  auto result = train_early_stop(std::move(net), normalized, assignment, options.train_config);

  ModelRecord record;
  record.n_objects = raw.n_objects;
  record.network = std::move(result.network);
  record.meta = input_meta(raw);
  record.version = 1;
  record.provenance = describe(raw, options.policy, options.split_seed, options.train_config,
                               result.report);
  return record;
}

// ---- bank --------------------------------------------------------------

NetworkBank::NetworkBank(fs::path root) : root_(std::move(root)) {}

std::unique_ptr<NetworkBank> NetworkBank::load(const fs::path& root) {
  auto bank = std::make_unique<NetworkBank>(root);
  std::error_code ec;
  if (!fs::exists(root, ec)) return bank;
  if (!fs::is_directory(root)) throw Error(root.string() + " is not a directory");

  static const std::regex dir_pattern("n([0-9]+)");
  static const std::regex file_pattern("v([0-9]+)\\.model");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    std::smatch m;
    const std::string name = dir.filename().string();
    if (!fs::is_directory(dir) || !std::regex_match(name, m, dir_pattern)) continue;
    const auto n = static_cast<std::size_t>(std::stoull(m[1]));

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Entry entry;
    for (const auto& file : files) {
      std::smatch fm;
      const std::string fname = file.filename().string();
      if (!std::regex_match(fname, fm, file_pattern)) continue;
      auto record = read_model_record(file);
      if (record.n_objects != n || record.version != std::stoull(fm[1])) {
        throw FormatError(file.string(), 0, "record contents do not match its path");
      }
      if (!entry.record || record.version > entry.record->version) {
        entry.record = std::make_shared<const ModelRecord>(std::move(record));
      }
    }
    if (!entry.record) continue;
    const fs::path raw = dir / "dataset.raw";
    if (fs::exists(raw)) {
      auto ds = read_raw(raw);
      if (ds.n_objects != n) throw FormatError(raw.string(), 0, "dataset N does not match directory");
      entry.dataset = std::make_shared<const RawDataset>(std::move(ds));
    }
    bank->entries_.emplace(n, std::move(entry));
  }
  return bank;
}

std::shared_ptr<const ModelRecord> NetworkBank::select(std::size_t n_objects) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(n_objects);
  if (it == entries_.end()) throw MissingModel(n_objects);
  return it->second.record;
}

bool NetworkBank::contains(std::size_t n_objects) const {
  std::shared_lock lock(mu_);
  return entries_.count(n_objects) != 0;
}

std::vector<std::size_t> NetworkBank::object_counts() const {
  std::shared_lock lock(mu_);
  std::vector<std::size_t> out;
  for (const auto& [n, entry] : entries_) out.push_back(n);
  return out;
}

std::shared_ptr<const RawDataset> NetworkBank::dataset(std::size_t n_objects) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(n_objects);
  return it == entries_.end() ? nullptr : it->second.dataset;
}

void NetworkBank::publish(ModelRecord record, RawDataset dataset) {
  record.validate();
  dataset.validate();
  if (dataset.n_objects != record.n_objects) {
    throw InvalidArgument("dataset N does not match the model record");
  }
  Entry entry{std::make_shared<const ModelRecord>(std::move(record)),
              std::make_shared<const RawDataset>(std::move(dataset))};
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(entry.record->n_objects);
    if (it != entries_.end() && entry.record->version <= it->second.record->version) {
      throw InvalidArgument("version " + std::to_string(entry.record->version) +
                            " does not advance current version " +
                            std::to_string(it->second.record->version));
    }
  }
  persist(entry);
  std::unique_lock lock(mu_);
  entries_[entry.record->n_objects] = std::move(entry);
}

std::mutex& NetworkBank::retrain_mutex(std::size_t n_objects) {
  std::lock_guard lock(retrain_map_mu_);
  auto& slot = retrain_mu_[n_objects];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::shared_ptr<const ModelRecord> NetworkBank::retrain_from_event(
    std::size_t n_objects, const std::vector<Observation>& event_records,
    const RetrainOptions& options) {
  if (event_records.empty()) throw InvalidArgument("retraining needs at least one event record");
  std::lock_guard serial(retrain_mutex(n_objects));

  auto current = select(n_objects);
  auto stored = dataset(n_objects);
  if (!stored) {
    throw InvalidArgument("no stored dataset for N=" + std::to_string(n_objects) +
                          "; cannot retrain");
  }
  for (const Observation& obs : event_records) {
    if (obs.locations.size() != n_objects || obs.hostility.size() != n_objects) {
      throw InvalidArgument("event record arity " + std::to_string(obs.locations.size()) +
                            " does not match N=" + std::to_string(n_objects));
    }
  }

  RawDataset grown = *stored;
  grown.groups.push_back(event_records);
  grown.validate();
  for (const Observation& obs : event_records) {
    for (const Location& p : obs.locations) {
      if (!grown.meta.bounds.contains(p)) throw InvalidArgument("event location outside area bounds");
    }
  }

  const TrainingProvenance& prior = current->provenance;
  auto normalized = normalize(grown, prior.policy);
  auto assignment = split(normalized, prior.split_seed);
  Network start = options.full_retrain
                      ? init(current->network.config, current->network.config.seed)
                      : current->network;
  // TrainingDiverged propagates; the current record is left untouched.
  auto result = train_early_stop(std::move(start), normalized, assignment, prior.train_config);

  ModelRecord next;
  next.n_objects = n_objects;
  next.network = std::move(result.network);
  next.meta = current->meta;
  next.version = current->version + 1;
  next.provenance = describe(grown, prior.policy, prior.split_seed, prior.train_config, result.report);
  publish(std::move(next), std::move(grown));
  return select(n_objects);
}

void NetworkBank::persist(const Entry& entry) const {
  if (root_.empty()) return;
  const fs::path dir = root_ / ("n" + std::to_string(entry.record->n_objects));
  fs::create_directories(dir);

  auto write_atomic = [](const fs::path& target, auto&& writer) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + tmp.string());
      writer(out);
      out.flush();
      if (!out) throw Error("failed writing " + tmp.string());
    }
    fs::rename(tmp, target);
  };

  const fs::path model = dir / ("v" + std::to_string(entry.record->version) + ".model");
  if (!fs::exists(model)) {
    write_atomic(model, [&](std::ostream& out) { write_model_record(*entry.record, out); });
  }
  if (entry.dataset) {
    write_atomic(dir / "dataset.raw", [&](std::ostream& out) { write_raw(*entry.dataset, out); });
  }
}

void NetworkBank::save() const {
  std::shared_lock lock(mu_);
  for (const auto& [n, entry] : entries_) persist(entry);
}

}  // namespace sentinel
