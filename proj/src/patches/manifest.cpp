#include "histo/patches/manifest.hpp"

#include <numeric>

#include "histo/error.hpp"
#include "histo/text.hpp"

namespace histo {

std::uint64_t total(const ClassCounts& counts) noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<std::size_t> SplitAssignment::indices_with(int tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == tag) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitAssignment::indices_without(int tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i] != tag) out.push_back(i);
  return out;
}

ClassCounts recount(std::span<const PatchRecord> records) noexcept {
  ClassCounts c{};
  for (const auto& r : records) ++c[static_cast<std::size_t>(code(r.label))];
  return c;
}

void DatasetManifest::add(PatchRecord record) {
  if (!is_valid_label_code(code(record.label))) fail(ErrorKind::kData, "invalid patch label");
  if (record.slide_id.find_first_of(",\n") != std::string::npos ||
      record.path.find_first_of(",\n") != std::string::npos ||
      record.group.find_first_of(",\n") != std::string::npos)
    fail(ErrorKind::kData, "manifest fields may not contain commas or newlines");
  ++counts_[static_cast<std::size_t>(code(record.label))];
  records_.push_back(std::move(record));
  split.reset();
}

void DatasetManifest::append(const DatasetManifest& other) {
  for (const auto& r : other.records()) add(r);
}

void DatasetManifest::relabel(std::size_t index, LabelClass label) {
  require(index < records_.size(), "record index out of range");
  require(is_valid_label_code(code(label)), "invalid label");
  --counts_[static_cast<std::size_t>(code(records_[index].label))];
  ++counts_[static_cast<std::size_t>(code(label))];
  records_[index].label = label;
}

void DatasetManifest::set_path(std::size_t index, std::string path) {
  require(index < records_.size(), "record index out of range");
  records_[index].path = std::move(path);
}

void DatasetManifest::validate() const {
  if (recount(records_) != counts_)
    fail(ErrorKind::kData, "manifest class counts disagree with a recount of its records");
  if (split) {
    if (split->tags.size() != records_.size())
      fail(ErrorKind::kData, "split assignment does not cover every record");
    const int limit = split->kind == SplitKind::kKFold ? split->folds : 2;
    for (int t : split->tags)
      if (t < 0 || t >= limit) fail(ErrorKind::kData, "split tag out of range");
  }
}

std::uint64_t SplitCounts::total() const noexcept { return histo::total(train) + histo::total(val); }

ClassCounts SplitCounts::combined() const noexcept {
  ClassCounts c{};
  for (int k = 0; k < kNumClasses; ++k) c[k] = train[k] + val[k];
  return c;
}

SplitCounts count_split(const DatasetManifest& manifest) {
  if (!manifest.split || manifest.split->kind != SplitKind::kTrainVal)
    fail(ErrorKind::kData, "manifest has no train/validation split");
  SplitCounts out;
  const auto records = manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& side = manifest.split->tags[i] == kTrainTag ? out.train : out.val;
    ++side[static_cast<std::size_t>(code(records[i].label))];
  }
  return out;
}

namespace {

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += text::format_real(v[i]);
  }
  return s;
}

std::vector<double> parse_reals(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (auto part : text::split(s, ',')) out.push_back(text::parse_real(part, what));
  return out;
}

}  // namespace

std::string render_manifest(const DatasetManifest& manifest) {
  manifest.validate();
  std::string out(kManifestHeader);
  out += "\n# slide_id, center_x, center_y, label, physical_um, pixel_px, path[, group]\n";
  for (const auto& r : manifest.records()) {
    out += r.slide_id + "," + text::format_real(r.center.x) + "," + text::format_real(r.center.y) +
           "," + std::to_string(code(r.label)) + "," + text::format_real(r.physical_um) + "," +
           std::to_string(r.pixel_px) + "," + r.path;
    if (!r.group.empty()) out += "," + r.group;
    out += '\n';
  }
  out += "[counts]\n";
  for (int c = 0; c < kNumClasses; ++c)
    out += std::string(label_name(label_from_code(c))) + "=" +
           std::to_string(manifest.per_class_counts()[c]) + "\n";
  out += "[meta]\nseed=" + std::to_string(manifest.seed) + "\n";
  for (const auto& [k, v] : manifest.meta) out += k + "=" + v + "\n";
  if (manifest.stats) {
    out += "[stats]\nmean=" + join_reals(manifest.stats->mean) +
           "\nstd=" + join_reals(manifest.stats->stddev) +
           "\ncount=" + std::to_string(manifest.stats->sample_count) + "\n";
  }
  if (manifest.split) {
    const auto& s = *manifest.split;
    out += "[split]\nkind=";
    out += s.kind == SplitKind::kKFold ? "kfold" : "train_val";
    out += "\nfolds=" + std::to_string(s.folds);
    out += "\nunderfilled_class=" + std::to_string(s.underfilled_class ? 1 : 0);
    out += "\ntags=";
    for (std::size_t i = 0; i < s.tags.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(s.tags[i]);
    }
    out += '\n';
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view contents) {
  DatasetManifest m;
  std::string section = "records";
  bool header_seen = false;
  std::map<std::string, std::map<std::string, std::string>> sections;
  int line_no = 0;
  for (auto raw : text::split(contents, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    if (!header_seen) {
      if (line != kManifestHeader)
        fail(ErrorKind::kFormat, where + ": expected header '" + std::string(kManifestHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.front() == '[' && line.back() == ']') {
      section = std::string(line.substr(1, line.size() - 2));
      continue;
    }
    if (section == "records") {
      const auto f = text::split(line, ',');
      if (f.size() != 7 && f.size() != 8) fail(ErrorKind::kFormat, where + ": expected 7 or 8 fields");
      PatchRecord r;
      r.slide_id = std::string(text::trim(f[0]));
      r.center = {text::parse_real(f[1], where), text::parse_real(f[2], where)};
      const auto label = text::parse_int(f[3], where);
      if (!is_valid_label_code(static_cast<int>(label)))
        fail(ErrorKind::kData, where + ": label out of range");
      r.label = label_from_code(static_cast<int>(label));
      r.physical_um = text::parse_real(f[4], where);
      r.pixel_px = static_cast<int>(text::parse_int(f[5], where));
      r.path = std::string(text::trim(f[6]));
      if (f.size() == 8) r.group = std::string(text::trim(f[7]));
      m.add(std::move(r));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::kFormat, where + ": expected key=value");
    sections[section][std::string(text::trim(line.substr(0, eq)))] =
        std::string(text::trim(line.substr(eq + 1)));
  }
  if (!header_seen) fail(ErrorKind::kFormat, "manifest is empty");

  if (auto it = sections.find("counts"); it != sections.end()) {
    for (int c = 0; c < kNumClasses; ++c) {
      const std::string key(label_name(label_from_code(c)));
      auto v = it->second.find(key);
      if (v == it->second.end()) fail(ErrorKind::kFormat, "manifest counts lack '" + key + "'");
      if (static_cast<std::uint64_t>(text::parse_int(v->second, key)) != m.per_class_counts()[c])
        fail(ErrorKind::kData, "manifest count for '" + key + "' disagrees with its records");
    }
  }
  if (auto it = sections.find("meta"); it != sections.end()) {
    for (const auto& [k, v] : it->second) {
      if (k == "seed")
        m.seed = static_cast<std::uint64_t>(text::parse_int(v, "seed"));
      else
        m.meta[k] = v;
    }
  }
  if (auto it = sections.find("stats"); it != sections.end()) {
    DatasetStats s;
    s.mean = parse_reals(it->second.at("mean"), "stats mean");
    s.stddev = parse_reals(it->second.at("std"), "stats std");
    s.sample_count = static_cast<std::size_t>(text::parse_int(it->second.at("count"), "stats count"));
    if (s.mean.size() != s.stddev.size()) fail(ErrorKind::kFormat, "stats mean/std lengths differ");
    m.stats = std::move(s);
  }
  if (auto it = sections.find("split"); it != sections.end()) {
    SplitAssignment s;
    const auto& kv = it->second;
    s.kind = kv.at("kind") == "kfold" ? SplitKind::kKFold : SplitKind::kTrainVal;
    s.folds = static_cast<int>(text::parse_int(kv.at("folds"), "split folds"));
    s.underfilled_class = kv.contains("underfilled_class") && kv.at("underfilled_class") == "1";
    const auto& tags = kv.at("tags");
    if (!tags.empty())
      for (auto t : text::split(tags, ','))
        s.tags.push_back(static_cast<int>(text::parse_int(t, "split tag")));
    m.split = std::move(s);
  }
  m.validate();
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  text::write_file(path, render_manifest(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing manifest " + path.string());
  return parse_manifest(text::read_file(path));
}

}  // namespace histo
