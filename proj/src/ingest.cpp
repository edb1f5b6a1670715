#include "echometrics/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "echometrics/csv.hpp"
#include "echometrics/error.hpp"

namespace echometrics {
namespace {

constexpr std::size_t kMaxProblems = 20;

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Either an event or the reason it was rejected.
struct ParsedRecord {
  std::optional<CommentEvent> event;
  std::string problem;
};

ParsedRecord reject(std::string reason) { return {std::nullopt, std::move(reason)}; }

ParsedRecord make_event(std::string user, std::string_view platform, std::string item,
                        std::string_view category, std::int64_t ts) {
  auto p = parse_platform(platform);
  if (!p) return reject(fmt::format("unknown platform '{}'", platform));
  auto c = parse_category(category);
  if (!c) return reject(fmt::format("unknown category '{}'", category));
  if (ts < 0) return reject("negative timestamp");
  if (user.empty()) return reject("empty user");
  if (item.empty()) return reject("empty item");
  return {CommentEvent{std::move(user), *p, std::move(item), *c, ts}, {}};
}

ParsedRecord parse_json_record(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return reject("not a JSON object");
  for (const char* key : {"user", "platform", "item", "category"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      return reject(fmt::format("missing string field '{}'", key));
    }
  }
  if (!j.contains("ts") || !j["ts"].is_number_integer()) {
    return reject("missing integer field 'ts'");
  }
  std::int64_t ts = 0;
  if (j["ts"].is_number_unsigned()) {
    const auto u = j["ts"].get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) return reject("timestamp out of range");
    ts = static_cast<std::int64_t>(u);
  } else {
    ts = j["ts"].get<std::int64_t>();
  }
  return make_event(j["user"].get<std::string>(), j["platform"].get<std::string>(),
                    j["item"].get<std::string>(), j["category"].get<std::string>(), ts);
}

struct CsvLayout {
  std::size_t user, platform, item, category, ts;
};

ParsedRecord parse_csv_record(std::string_view line, const CsvLayout& layout,
                              std::size_t width) {
  std::vector<std::string> fields;
  try {
    fields = csv::split_line(line);
  } catch (const ValidationError& e) {
    return reject(e.what());
  }
  if (fields.size() != width) return reject("wrong field count");
  auto ts = parse_int<std::int64_t>(fields[layout.ts]);
  if (!ts) return reject("non-integer timestamp");
  return make_event(fields[layout.user], fields[layout.platform], fields[layout.item],
                    fields[layout.category], *ts);
}

void note(LoadedEvents& loaded, std::size_t line_no, std::string_view problem) {
  ++loaded.malformed;
  if (loaded.problems.size() < kMaxProblems) {
    loaded.problems.push_back(fmt::format("line {}: {}", line_no, problem));
  }
}

}  // namespace

std::string_view to_string(Platform platform) {
  return platform == Platform::facebook ? "facebook" : "youtube";
}

std::string_view to_string(Category category) {
  return category == Category::science ? "science" : "conspiracy";
}

std::optional<Platform> parse_platform(std::string_view text) {
  if (text == "facebook") return Platform::facebook;
  if (text == "youtube") return Platform::youtube;
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view text) {
  if (text == "science") return Category::science;
  if (text == "conspiracy") return Category::conspiracy;
  return std::nullopt;
}

Dataset build_dataset(std::vector<CommentEvent> events) {
  Dataset dataset;
  dataset.events = std::move(events);
  for (std::size_t i = 0; i < dataset.events.size(); ++i) {
    const CommentEvent& e = dataset.events[i];
    auto [it, inserted] = dataset.items.try_emplace(ItemKey{e.platform, e.item_id});
    ItemStats& stats = it->second;
    if (inserted) {
      stats.item_id = e.item_id;
      stats.platform = e.platform;
      stats.category = e.category;
    } else if (stats.category != e.category) {
      throw ValidationError(fmt::format("item '{}' appears under both categories", e.item_id));
    }
    ++stats.comments;
    dataset.users[UserKey{e.platform, e.user_id}].push_back(i);
  }
  for (auto& [key, indices] : dataset.users) {
    std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
      return dataset.events[a].timestamp < dataset.events[b].timestamp;
    });
  }
  return dataset;
}

LoadedEvents parse_events(std::istream& in, EventFormat format) {
  LoadedEvents loaded;
  std::vector<CommentEvent> events;
  // Category first seen for each item; later disagreeing records are rejected.
  std::map<ItemKey, Category> item_category;

  std::optional<CsvLayout> layout;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    if (format == EventFormat::csv && !layout) {
      const auto header = csv::split_line(line);
      auto find = [&](std::string_view name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
          throw ValidationError(fmt::format("csv header lacks '{}'", name));
        }
        return static_cast<std::size_t>(it - header.begin());
      };
      layout = CsvLayout{find("user"), find("platform"), find("item"), find("category"),
                         find("ts")};
      width = header.size();
      continue;
    }

    ++loaded.records;
    ParsedRecord record = format == EventFormat::jsonl
                              ? parse_json_record(line)
                              : parse_csv_record(line, *layout, width);
    if (!record.event) {
      note(loaded, line_no, record.problem);
      continue;
    }
    CommentEvent& e = *record.event;
    auto [it, inserted] = item_category.try_emplace(ItemKey{e.platform, e.item_id}, e.category);
    if (!inserted && it->second != e.category) {
      note(loaded, line_no, fmt::format("item '{}' already labeled {}", e.item_id,
                                        to_string(it->second)));
      continue;
    }
    events.push_back(std::move(e));
  }

  if (loaded.records > 0 &&
      static_cast<double>(loaded.malformed) >
          kMaxMalformedFraction * static_cast<double>(loaded.records)) {
    std::string summary = fmt::format("{} of {} records malformed (limit {:.0f}%)",
                                      loaded.malformed, loaded.records,
                                      kMaxMalformedFraction * 100);
    for (const auto& p : loaded.problems) summary += "\n  " + p;
    throw ValidationError(summary);
  }
  loaded.dataset = build_dataset(std::move(events));
  return loaded;
}

LoadedEvents load_events(const std::filesystem::path& path, EventFormat format) {
  std::ifstream in{path};
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  return parse_events(in, format);
}

void write_events(std::ostream& out, const Dataset& dataset, EventFormat format) {
  if (format == EventFormat::csv) out << "user,platform,item,category,ts\n";
  for (const CommentEvent& e : dataset.events) {
    if (format == EventFormat::jsonl) {
      nlohmann::ordered_json j;
      j["user"] = e.user_id;
      j["platform"] = to_string(e.platform);
      j["item"] = e.item_id;
      j["category"] = to_string(e.category);
      j["ts"] = e.timestamp;
      out << j.dump() << '\n';
    } else {
      out << csv::join({e.user_id, std::string{to_string(e.platform)}, e.item_id,
                        std::string{to_string(e.category)}, std::to_string(e.timestamp)})
          << '\n';
    }
  }
}

LoadedItems parse_item_stats(std::istream& in) {
  const csv::Table table = csv::read(in);
  LoadedItems loaded;
  if (table.header.empty()) return loaded;
  const std::size_t c_item = table.column("item_id");
  const std::size_t c_platform = table.column("platform");
  const std::size_t c_category = table.column("category");
  const std::size_t c_comments = table.column("comments");
  const std::size_t c_likes = table.column("likes");
  const std::size_t c_shares = table.column("shares");
  const std::size_t c_views = table.column("views");

  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      ++loaded.rejected;
      continue;
    }
    auto platform = parse_platform(row[c_platform]);
    auto category = parse_category(row[c_category]);
    auto comments = parse_int<std::int64_t>(row[c_comments]);
    auto likes = parse_int<std::int64_t>(row[c_likes]);
    auto shares = parse_int<std::int64_t>(row[c_shares]);
    auto views = parse_int<std::int64_t>(row[c_views]);
    const bool counts_ok = comments && likes && shares && views && *comments >= 0 &&
                           *likes >= 0 && *shares >= 0 && *views >= 0;
    if (!platform || !category || !counts_ok || row[c_item].empty()) {
      ++loaded.rejected;
      continue;
    }
    if ((*platform == Platform::youtube && *shares != 0) ||
        (*platform == Platform::facebook && *views != 0)) {
      ++loaded.rejected;
      continue;
    }
    ItemStats stats{row[c_item],
                    *platform,
                    *category,
                    static_cast<std::uint64_t>(*comments),
                    static_cast<std::uint64_t>(*likes),
                    static_cast<std::uint64_t>(*shares),
                    static_cast<std::uint64_t>(*views)};
    auto [it, inserted] = loaded.items.try_emplace(ItemKey{*platform, stats.item_id}, stats);
    if (!inserted) {
      throw ValidationError(fmt::format("duplicate item '{}' on {}", stats.item_id,
                                        to_string(*platform)));
    }
  }
  return loaded;
}

LoadedItems load_item_stats(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  return parse_item_stats(in);
}

void write_item_stats(std::ostream& out, const ItemTable& items) {
  out << "item_id,platform,category,comments,likes,shares,views\n";
  for (const auto& [key, s] : items) {
    out << csv::join({s.item_id, std::string{to_string(s.platform)},
                      std::string{to_string(s.category)}, std::to_string(s.comments),
                      std::to_string(s.likes), std::to_string(s.shares),
                      std::to_string(s.views)})
        << '\n';
  }
}

}  // namespace echometrics
