#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace echometrics {

enum class Platform : std::uint8_t { facebook, youtube };
enum class Category : std::uint8_t { science, conspiracy };
enum class EventFormat : std::uint8_t { jsonl, csv };

std::string_view to_string(Platform platform);
std::string_view to_string(Category category);
std::optional<Platform> parse_platform(std::string_view text);
std::optional<Category> parse_category(std::string_view text);

struct CommentEvent {
  std::string user_id;
  Platform platform = Platform::facebook;
  std::string item_id;
  Category category = Category::science;
  std::int64_t timestamp = 0;

  bool operator==(const CommentEvent&) const = default;
};

// The same item_id may name a Facebook post and its linked YouTube video, so
// items are keyed by (platform, item_id). Users are keyed the same way.
struct ItemKey {
  Platform platform = Platform::facebook;
  std::string item_id;

  auto operator<=>(const ItemKey&) const = default;
};

struct UserKey {
  Platform platform = Platform::facebook;
  std::string user_id;

  auto operator<=>(const UserKey&) const = default;
};

struct ItemStats {
  std::string item_id;
  Platform platform = Platform::facebook;
  Category category = Category::science;
  std::uint64_t comments = 0;
  std::uint64_t likes = 0;
  std::uint64_t shares = 0;  // facebook only
  std::uint64_t views = 0;   // youtube only

  bool operator==(const ItemStats&) const = default;
};

using ItemTable = std::map<ItemKey, ItemStats>;

// Immutable once built. Per-user index lists are sorted by (timestamp, input
// position); every event's item resolves in `items` with matching category.
struct Dataset {
  std::vector<CommentEvent> events;
  ItemTable items;
  std::map<UserKey, std::vector<std::size_t>> users;
};

// Builds the item and user indices. Item comment counts are tallied from the
// events. Throws ValidationError if an item appears under two categories.
Dataset build_dataset(std::vector<CommentEvent> events);

struct LoadedEvents {
  Dataset dataset;
  std::size_t records = 0;    // non-blank input records
  std::size_t malformed = 0;  // rejected records
  std::vector<std::string> problems;  // first few rejection reasons
};

// Fraction of malformed records above which loading aborts.
inline constexpr double kMaxMalformedFraction = 0.10;

LoadedEvents parse_events(std::istream& in, EventFormat format);
LoadedEvents load_events(const std::filesystem::path& path, EventFormat format);

void write_events(std::ostream& out, const Dataset& dataset, EventFormat format);

struct LoadedItems {
  ItemTable items;
  std::size_t rejected = 0;
};

// Item-stats CSV: item_id,platform,category,comments,likes,shares,views.
// Rows with negative counts or platform-inapplicable counts are rejected;
// a duplicate (platform, item_id) aborts.
LoadedItems parse_item_stats(std::istream& in);
LoadedItems load_item_stats(const std::filesystem::path& path);

void write_item_stats(std::ostream& out, const ItemTable& items);

}  // namespace echometrics
