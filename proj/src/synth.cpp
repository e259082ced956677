#include "capsnet/synth.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace capsnet {

namespace {

using Pool = std::vector<std::string>;

const Pool kFirstNames = {"rosa", "miles", "june",  "otto", "vera",  "felix", "nina", "amos",
                          "ivy",  "hugo",  "clara", "levi", "stella", "ray",  "paloma", "dexter"};
const Pool kLastNames = {"linden", "calloway", "fontaine", "harper", "mercer", "quinn",
                         "vance",  "delgado",  "okafor",   "stone",  "beaumont", "ellis",
                         "ramsey", "navarro",  "whitfield", "cross"};
const Pool kTitleAdj = {"silver",  "broken", "golden", "quiet",   "electric", "lonely", "crimson",
                        "frozen",  "hidden", "distant", "burning", "gentle",  "wild",   "ancient",
                        "neon",    "velvet", "paper",  "hollow",  "shining", "midnight"};
// several nouns deliberately collide with other intents' cue words (titles
// like "the frozen weather" or "broken reservation"), so an utterance's class
// often hinges on context rather than any single token
const Pool kTitleNoun = {"river",  "sky",    "heart",  "road",   "garden", "mirror", "storm",
                         "dream",  "city",   "ocean",  "train",  "letter", "mountain", "shadow",
                         "window", "island", "winter", "summer", "fire",   "dance",  "star",
                         "valley", "door",   "harvest", "weather", "rain",  "forecast", "playlist",
                         "reservation", "table", "dinner",  "movie",  "rating", "umbrella",
                         "restaurant",  "snow",  "theatre", "ticket"};
const Pool kMusicItem = {"song", "track", "album", "tune", "record", "single", "melody"};
const Pool kGenre = {"jazz",   "blues", "folk", "techno", "reggae", "soul",
                     "country", "disco", "funk", "opera",  "indie rock", "classical music"};
const Pool kPlaylistAdj = {"morning", "rainy day", "late night", "workout", "road trip",
                           "sunday",  "focus",     "party",      "mellow",  "retro"};
const Pool kPlaylistNoun = {"vibes", "mix", "beats", "anthems", "classics", "favorites", "jams"};
const Pool kCity = {"portland",  "austin",   "denver",  "savannah", "boise",   "tucson",
                    "madison",   "richmond", "omaha",   "tulsa",    "fresno",  "tacoma",
                    "knoxville", "dayton",   "lubbock", "reno",     "spokane", "laredo",
                    "augusta",   "fargo"};
const Pool kRegion = {"oregon", "texas",   "colorado", "georgia",  "idaho",   "arizona",
                      "ohio",   "virginia", "nebraska", "oklahoma", "california", "washington"};
const Pool kCondition = {"rain", "snow", "fog", "hail", "wind", "storms", "sunshine", "sleet"};
const Pool kTimeExpr = {"tomorrow",        "tonight",         "this evening",  "next friday",
                        "in two hours",    "at noon",         "this weekend",  "on march third",
                        "next week",       "in ten minutes",  "at eight pm",   "on new years eve"};
const Pool kCuisine = {"thai",    "italian", "mexican",  "korean", "greek",   "french",
                       "indian",  "vietnamese", "spanish", "turkish", "ethiopian", "japanese"};
const Pool kRestaurantType = {"bistro", "diner", "steakhouse", "pub", "cafe", "brasserie",
                              "taverna", "pizzeria", "food truck", "gastropub"};
const Pool kPartySize = {"two", "three", "four", "five", "six", "seven", "eight"};
const Pool kRatingNum = {"one", "two", "three", "four", "five", "six"};
const Pool kRatingUnit = {"stars", "points"};
const Pool kBookType = {"book", "novel", "essay", "chronicle", "saga", "textbook", "album"};
const Pool kCreativeType = {"movie", "film",  "show",    "series", "novel",
                            "book",  "game",  "painting", "picture", "soundtrack"};
const Pool kTheatre = {"the grand cinema",   "star theatre",      "the roxy",
                       "downtown cineplex",  "the majestic",      "riverside movie house",
                       "the orpheum",        "sunset drive in",   "northgate cinemas"};

struct Chunk {
  std::string text;
  std::string entity;  // empty for plain text
};
using Template = std::string;  // "{slot}" placeholders

const std::vector<Template> kAddToPlaylist = {
    "add {title} to my {playlist} playlist",
    "add this {music_item} by {artist} to {playlist}",
    "put {title} onto the {playlist} playlist",
    "add {artist} to {playlist}",
    "i need {title} in my {playlist} playlist",
    "add the {music_item} {title} to {playlist}",
    "can you put this {music_item} on {playlist}",
    "stick {title} by {artist} on my {playlist} playlist",
    "add some {genre} to my {playlist} playlist",
    "put the artist {artist} in {playlist}",
};
const std::vector<Template> kBookRestaurant = {
    "book a table for {party} at a {cuisine} {rtype} in {city}",
    "reserve a spot for {party} people {time}",
    "i want to eat at a {rtype} in {city} {time}",
    "book the best {cuisine} place in {city} for {party}",
    "make a reservation at a {cuisine} {rtype} for {party} people",
    "find me a table for {party} in {city} {time}",
    "book a {rtype} near {city} {region} for {time}",
    "i need a dinner reservation for {party} {time}",
    "reserve a table at a {rtype} serving {cuisine} food",
    "book something to eat in {city} for {party} people {time}",
};
const std::vector<Template> kGetWeather = {
    "what's the weather in {city}",
    "will it {condition} in {city} {time}",
    "weather forecast for {city} {region}",
    "what is the forecast for {time} in {city}",
    "is there {condition} expected in {city} {region} {time}",
    "how cold will it be in {city} {time}",
    "tell me if i need an umbrella in {city} {time}",
    "what will the weather be like {time}",
    "check the forecast for {region} {time}",
    "is it going to {condition} near {city}",
};
const std::vector<Template> kPlayMusic = {
    "play {title}",
    "play {title} by {artist}",
    "play some {genre}",
    "i want to hear {artist}",
    "play the {music_item} {title}",
    "put on some {genre} music",
    "play the latest {music_item} by {artist}",
    "can you play {artist}'s {music_item} {title}",
    "start playing {genre} from my {playlist} playlist",
    "hear the {music_item} {title} by {artist}",
    // elliptical: also a SearchCreativeWork template, as in real query logs
    "{title} by {artist}",
};
const std::vector<Template> kRateBook = {
    "rate {title} {rating} {unit}",
    "give {rating} {unit} to {title}",
    "rate the current {book_type} {rating} out of six",
    "i give the {book_type} {title} {rating} {unit}",
    "rate this {book_type} a {rating}",
    "give the {book_type} series {title} {rating} out of six {unit}",
    "add a rating of {rating} to {title}",
    "mark {title} by {artist} {rating} {unit}",
    "this {book_type} deserves {rating} {unit}",
    "rate {title} a solid {rating} of six",
};
const std::vector<Template> kSearchCreativeWork = {
    "find the {creative_type} {title}",
    "show me {title}",
    "i want to watch {title}",
    "can you find {title} by {artist}",
    "look for the {creative_type} called {title}",
    "search for the {creative_type} {title}",
    "find me the {creative_type} {title} by {artist}",
    "i am looking for {title}",
    "show the {creative_type} named {title}",
    "where can i get the {creative_type} {title}",
    // ellipticals shared with PlayMusic / SearchScreeningEvent
    "{title} by {artist}",
    "i want to see {title}",
};
const std::vector<Template> kSearchScreeningEvent = {
    "what time is {title} playing at {theatre}",
    "find movie schedules at {theatre}",
    "is {title} showing at {theatre} {time}",
    "show me the movie times for {theatre}",
    "when is {title} playing {time}",
    "find a screening of {title} in {city}",
    "i want to see {title} at the nearest movie house",
    "check showtimes for {title} {time}",
    "what films are playing at {theatre} {time}",
    "get me tickets for {title} at {theatre}",
    // elliptical: also a SearchCreativeWork template
    "i want to see {title}",
};

const std::string& pick(const Pool& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

std::string make_title(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 2);
  const std::string body = pick(kTitleAdj, rng) + " " + pick(kTitleNoun, rng);
  return coin(rng) == 0 ? body : "the " + body;
}

std::string make_artist(std::mt19937_64& rng) {
  return pick(kFirstNames, rng) + " " + pick(kLastNames, rng);
}

std::string make_playlist(std::mt19937_64& rng) {
  return pick(kPlaylistAdj, rng) + " " + pick(kPlaylistNoun, rng);
}

std::string fill_slot(const std::string& slot, std::mt19937_64& rng) {
  if (slot == "title") return make_title(rng);
  if (slot == "artist") return make_artist(rng);
  if (slot == "playlist") return make_playlist(rng);
  if (slot == "music_item") return pick(kMusicItem, rng);
  if (slot == "genre") return pick(kGenre, rng);
  if (slot == "city") return pick(kCity, rng);
  if (slot == "region") return pick(kRegion, rng);
  if (slot == "condition") return pick(kCondition, rng);
  if (slot == "time") return pick(kTimeExpr, rng);
  if (slot == "cuisine") return pick(kCuisine, rng);
  if (slot == "rtype") return pick(kRestaurantType, rng);
  if (slot == "party") return pick(kPartySize, rng);
  if (slot == "rating") return pick(kRatingNum, rng);
  if (slot == "unit") return pick(kRatingUnit, rng);
  if (slot == "book_type") return pick(kBookType, rng);
  if (slot == "creative_type") return pick(kCreativeType, rng);
  if (slot == "theatre") return pick(kTheatre, rng);
  throw ConfigError("demo corpus: unknown slot '" + slot + "'");
}

std::vector<Chunk> expand(const Template& tmpl, std::mt19937_64& rng) {
  std::vector<Chunk> chunks;
  std::string literal;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      if (!literal.empty()) {
        chunks.push_back({literal, ""});
        literal.clear();
      }
      const std::string slot = tmpl.substr(i + 1, close - i - 1);
      chunks.push_back({fill_slot(slot, rng), slot});
      i = close + 1;
    } else {
      literal.push_back(tmpl[i]);
      ++i;
    }
  }
  if (!literal.empty()) chunks.push_back({literal, ""});
  return chunks;
}

json entries_for(const std::vector<Template>& templates, Index count, std::mt19937_64& rng) {
  json entries = json::array();
  std::uniform_int_distribution<std::size_t> tdist(0, templates.size() - 1);
  for (Index n = 0; n < count; ++n) {
    json data = json::array();
    for (const Chunk& c : expand(templates[tdist(rng)], rng)) {
      json chunk;
      chunk["text"] = c.text;
      if (!c.entity.empty()) chunk["entity"] = c.entity;
      data.push_back(chunk);
    }
    entries.push_back({{"data", data}});
  }
  return entries;
}

}  // namespace

void generate_demo_corpus(const std::string& raw_dir, std::uint64_t seed, Index train_per_intent,
                          Index test_per_intent) {
  const std::map<std::string, const std::vector<Template>*> intents = {
      {"AddToPlaylist", &kAddToPlaylist},
      {"BookRestaurant", &kBookRestaurant},
      {"GetWeather", &kGetWeather},
      {"PlayMusic", &kPlayMusic},
      {"RateBook", &kRateBook},
      {"SearchCreativeWork", &kSearchCreativeWork},
      {"SearchScreeningEvent", &kSearchScreeningEvent}};
  std::mt19937_64 rng(seed);
  for (const auto& [intent, templates] : intents) {
    const fs::path dir = fs::path(raw_dir) / intent;
    fs::create_directories(dir);
    json train_doc, test_doc;
    train_doc[intent] = entries_for(*templates, train_per_intent, rng);
    test_doc[intent] = entries_for(*templates, test_per_intent, rng);
    std::ofstream train_out(dir / ("train_" + intent + "_full.json"));
    std::ofstream test_out(dir / ("validate_" + intent + ".json"));
    if (!train_out || !test_out) throw IoError("cannot write demo corpus under " + raw_dir);
    train_out << train_doc.dump(1) << '\n';
    test_out << test_doc.dump(1) << '\n';
  }
}

}  // namespace capsnet
