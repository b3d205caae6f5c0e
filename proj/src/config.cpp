#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"

namespace sponsim {

namespace pt = boost::property_tree;

namespace {

class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {}

  std::string field(const std::string& key) const { return name_ + "." + key; }

  // Rejects keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, _] : tree_) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError(field(key), "unknown key");
      }
    }
  }

  std::optional<std::string> text(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  std::string required_text(const std::string& key) const {
    auto v = text(key);
    if (!v || v->empty()) throw ConfigError(field(key), "missing");
    return *v;
  }

  template <typename T>
  std::optional<T> number(const std::string& key) const {
    auto v = text(key);
    if (!v) return std::nullopt;
    T out{};
    const char* first = v->data();
    const char* last = v->data() + v->size();
    if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t used = 0;
        out = static_cast<T>(std::stod(*v, &used));
        if (used != v->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigError(field(key), "not a number: '" + *v + "'");
      }
    } else {
      auto [ptr, ec] = std::from_chars(first, last, out);
      if (ec != std::errc() || ptr != last) {
        throw ConfigError(field(key), "not an integer: '" + *v + "'");
      }
    }
    return out;
  }

  template <typename T>
  T required_number(const std::string& key) const {
    auto v = number<T>(key);
    if (!v) throw ConfigError(field(key), "missing");
    return *v;
  }

 private:
  std::string name_;
  const pt::ptree& tree_;
};

WindowKind window_kind(const std::string& field, const std::string& name) {
  if (name == "time") return WindowKind::time;
  if (name == "impressions") return WindowKind::impressions;
  if (name == "clicks") return WindowKind::clicks;
  if (name == "relative") return WindowKind::relative;
  throw ConfigError(field, "unknown estimator '" + name + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      const auto b = cur.find_first_not_of(" \t");
      const auto e = cur.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

}  // namespace

ScenarioConfig parse_config(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& ex) {
    throw ConfigError("line " + std::to_string(ex.line()), ex.message());
  }

  ScenarioConfig cfg;
  // Window sizes are applied after the whole file is read.
  Millis time_window = 5'000, relative_interval = 0;
  std::int64_t impression_window = 100, click_window = 10;
  std::vector<WindowKind> kinds{WindowKind::time, WindowKind::impressions, WindowKind::clicks,
                                WindowKind::relative};
  WindowKind ranking_kind = WindowKind::relative;
  std::set<std::string> seen_advertisers;
  std::vector<bool> explicit_seed;

  for (const auto& [name, tree] : root) {
    if (!tree.data().empty()) throw ConfigError(name, "key outside any section");
    const Section s(name, tree);

    if (name == "scenario") {
      s.only({"seed", "horizon_ms", "tick_ms", "focus", "flagged", "cold_start_ctr",
              "ranking_estimator"});
      if (auto v = s.number<std::uint64_t>("seed")) cfg.seed = Seed{*v};
      if (auto v = s.number<Millis>("horizon_ms")) cfg.horizon_ms = *v;
      if (auto v = s.number<Millis>("tick_ms")) cfg.tick_ms = *v;
      if (s.text("focus")) cfg.focus = AdvertiserId(s.required_text("focus"));
      if (auto v = s.text("flagged")) {
        if (*v == "count") {
          cfg.flagged = FlaggedClicks::count;
        } else if (*v == "drop") {
          cfg.flagged = FlaggedClicks::drop;
        } else {
          throw ConfigError(s.field("flagged"), "expected count or drop");
        }
      }
      if (auto v = s.number<double>("cold_start_ctr")) cfg.cold_start_ctr = *v;
      if (auto v = s.text("ranking_estimator")) {
        ranking_kind = window_kind(s.field("ranking_estimator"), *v);
      }
    } else if (name == "auction") {
      s.only({"mechanism", "num_slots", "reserve_cents", "ranking"});
      if (auto v = s.text("mechanism")) {
        if (*v == "gsp") {
          cfg.mechanism = Mechanism::gsp;
        } else if (*v == "gfp") {
          cfg.mechanism = Mechanism::gfp;
        } else {
          throw ConfigError(s.field("mechanism"), "expected gsp or gfp");
        }
      }
      if (auto v = s.number<int>("num_slots")) cfg.auction.num_slots = *v;
      if (auto v = s.number<Cents>("reserve_cents")) cfg.auction.reserve_price = *v;
      if (auto v = s.text("ranking")) {
        if (*v == "by_bid") {
          cfg.auction.ranking = Ranking::by_bid;
        } else if (*v == "by_ctr_weighted") {
          cfg.auction.ranking = Ranking::by_ctr_weighted;
        } else {
          throw ConfigError(s.field("ranking"), "expected by_bid or by_ctr_weighted");
        }
      }
    } else if (name == "traffic") {
      s.only({"queries_per_second", "position_decay"});
      if (auto v = s.number<double>("queries_per_second")) cfg.queries_per_second = *v;
      if (auto v = s.number<double>("position_decay")) cfg.position_decay = *v;
    } else if (name.rfind("advertiser.", 0) == 0) {
      s.only({"bid_cents", "value_cents", "base_ctr"});
      const std::string id = name.substr(std::string("advertiser.").size());
      if (id.empty()) throw ConfigError(name, "empty advertiser id");
      if (!seen_advertisers.insert(id).second) throw ConfigError(name, "duplicate advertiser");
      AdvertiserSpec adv{AdvertiserId(id), s.required_number<Cents>("bid_cents"), 0,
                         s.required_number<double>("base_ctr")};
      adv.value = s.number<Cents>("value_cents").value_or(adv.bid);
      cfg.advertisers.push_back(std::move(adv));
    } else if (name.rfind("fraud.", 0) == 0) {
      s.only({"kind", "target", "start_ms", "count", "interval_ms", "dwell_mu", "dwell_sigma",
              "seed"});
      const std::string plan_name = name.substr(std::string("fraud.").size());
      if (plan_name.empty()) throw ConfigError(name, "empty fraud plan name");
      FraudPlan plan{FraudKind::scripted, AdvertiserId(s.required_text("target"))};
      const auto kind = s.required_text("kind");
      if (kind == "scripted") {
        plan.kind = FraudKind::scripted;
      } else if (kind == "human") {
        plan.kind = FraudKind::human;
      } else {
        throw ConfigError(s.field("kind"), "expected scripted or human");
      }
      plan.start_ms = s.required_number<Millis>("start_ms");
      plan.count = s.required_number<std::int64_t>("count");
      if (auto v = s.number<Millis>("interval_ms")) plan.interval_ms = *v;
      if (auto v = s.number<double>("dwell_mu")) plan.dwell.mu = *v;
      if (auto v = s.number<double>("dwell_sigma")) plan.dwell.sigma = *v;
      const auto seed = s.number<std::uint64_t>("seed");
      if (seed) plan.seed = Seed{*seed};
      explicit_seed.push_back(seed.has_value());
      cfg.fraud.push_back({plan_name, std::move(plan)});
    } else if (name == "estimators") {
      s.only({"list", "time_window_ms", "impression_window", "click_window",
              "relative_interval_ms"});
      if (auto v = s.text("list")) {
        kinds.clear();
        for (const auto& item : split_list(*v)) kinds.push_back(window_kind(s.field("list"), item));
        if (kinds.empty()) throw ConfigError(s.field("list"), "no estimators selected");
      }
      if (auto v = s.number<Millis>("time_window_ms")) time_window = *v;
      if (auto v = s.number<std::int64_t>("impression_window")) impression_window = *v;
      if (auto v = s.number<std::int64_t>("click_window")) click_window = *v;
      if (auto v = s.number<Millis>("relative_interval_ms")) relative_interval = *v;
    } else if (name == "detector") {
      s.only({"min_run", "tolerance_ms", "max_skip"});
      if (auto v = s.number<std::int64_t>("min_run")) cfg.detector.min_run = *v;
      if (auto v = s.number<Millis>("tolerance_ms")) cfg.detector.tolerance_ms = *v;
      if (auto v = s.number<std::int64_t>("max_skip")) cfg.detector.max_skip = *v;
    } else if (name == "output") {
      s.only({"csv", "svg", "log"});
      if (auto v = s.text("csv")) cfg.csv_path = *v;
      if (auto v = s.text("svg")) cfg.svg_path = *v;
      if (auto v = s.text("log")) cfg.log_path = *v;
    } else {
      throw ConfigError(name, "unknown section");
    }
  }

  auto make = [&](WindowKind kind) -> WindowSpec {
    switch (kind) {
      case WindowKind::time:
        return WindowSpec::time_window(time_window);
      case WindowKind::impressions:
        return WindowSpec::impression_window(impression_window);
      case WindowKind::clicks:
        return WindowSpec::click_window(click_window);
      case WindowKind::relative:
        return WindowSpec::relative_interval(relative_interval);
    }
    return WindowSpec::relative_cumulative();
  };
  cfg.estimators.clear();
  for (auto kind : kinds) cfg.estimators.push_back(make(kind));
  cfg.ranking_estimator = make(ranking_kind);

  // Unseeded fraud plans get a stream derived from the scenario seed.
  for (std::size_t i = 0; i < cfg.fraud.size(); ++i) {
    if (!explicit_seed[i]) cfg.fraud[i].plan.seed = Seed{mix_seed(cfg.seed.value, i + 1)};
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  return parse_config(in);
}

}  // namespace sponsim
