#include "qlrg/serialize.hpp"

#include "qlrg/error.hpp"

#include <charconv>
#include <string>

namespace qlrg {

namespace {

template <class F>
auto parse_guard(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("malformed JSON: ") + e.what());
  }
}

} // namespace

json to_json(const ModeSet& modes) {
  json members = json::array();
  for (const Mode& m : modes.members()) members.push_back(m.components());
  return {{"dim", modes.dim()}, {"members", members}};
}

ModeSetPtr mode_set_from_json(const json& j) {
  return parse_guard([&] {
    const int dim = j.at("dim").get<int>();
    if (j.contains("nmax") && !j.contains("members")) return build_mode_set(dim, j.at("nmax").get<int>());
    std::vector<Mode> members;
    for (const auto& m : j.at("members")) members.emplace_back(m.get<std::vector<int>>());
    return std::make_shared<const ModeSet>(ModeSet::from_members(dim, std::move(members)));
  });
}

json to_json(const CutoffProfile& profile) {
  if (profile.kind() == CutoffProfile::Kind::exponential) return {{"kind", "exponential"}};
  json pts = json::array();
  for (const auto& [s, f] : profile.points()) pts.push_back({s, f});
  return {{"kind", "table"}, {"points", pts}};
}

CutoffProfile profile_from_json(const json& j) {
  return parse_guard([&] {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "exponential") return CutoffProfile::exponential();
    if (kind != "table") fail(ErrorCode::parse, "unknown cutoff profile kind: " + kind);
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return CutoffProfile::table(std::move(pts));
  });
}

json ordering_to_json(const CovariancePtr& cov) {
  if (!cov) return {{"kind", "plain"}};
  return {{"kind", "gaussian"}, {"lambda", cov->lambda()}, {"profile", to_json(cov->profile())}};
}

CovariancePtr ordering_from_json(const json& j, const ModeSetPtr& modes) {
  return parse_guard([&]() -> CovariancePtr {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "plain") return nullptr;
    if (kind != "gaussian") fail(ErrorCode::parse, "unknown ordering kind: " + kind);
    CutoffProfile profile = j.contains("profile") ? profile_from_json(j.at("profile"))
                                                  : CutoffProfile::exponential();
    return make_covariance(modes, j.at("lambda").get<double>(), std::move(profile));
  });
}

json key_to_json(const Key& key, const ModeSet& modes) {
  json out = json::array();
  for (int i : key) out.push_back(modes[static_cast<std::size_t>(i)].components());
  return out;
}

std::string key_label(const Key& key, const ModeSet& modes) {
  std::string s = "(";
  for (std::size_t t = 0; t < key.size(); ++t) {
    if (t) s += ' ';
    const Mode& m = modes[static_cast<std::size_t>(key[t])];
    if (m.dim() == 1) {
      s += std::to_string(m[0]);
    } else {
      s += '[';
      for (int a = 0; a < m.dim(); ++a) s += (a ? "," : "") + std::to_string(m[a]);
      s += ']';
    }
  }
  return s + ")";
}

json to_json(const WickPoly& p) {
  json terms = json::array();
  for (const auto& [k, v] : p.terms()) terms.push_back({key_to_json(k, *p.modes()), v.real(), v.imag()});
  json cap = p.degree_cap() == kNoDegreeCap ? json(nullptr) : json(p.degree_cap());
  return {{"format", "qlrg.wickpoly/1"},
          {"modes", to_json(*p.modes())},
          {"ordering", ordering_to_json(p.ordering())},
          {"degree_cap", cap},
          {"real", p.real_flag()},
          {"terms", terms}};
}

WickPoly wick_from_json(const json& j) {
  return parse_guard([&] {
    if (j.contains("format") && j.at("format") != "qlrg.wickpoly/1")
      fail(ErrorCode::parse, "unsupported polynomial format");
    auto modes = mode_set_from_json(j.at("modes"));
    auto ordering = ordering_from_json(j.at("ordering"), modes);
    const int cap = (!j.contains("degree_cap") || j.at("degree_cap").is_null())
                        ? kNoDegreeCap
                        : j.at("degree_cap").get<int>();
    WickPoly p(modes, ordering, cap);
    for (const auto& t : j.at("terms")) {
      Key key;
      for (const auto& m : t.at(0)) key.push_back(static_cast<int>(modes->index_of(Mode(m.get<std::vector<int>>()))));
      p.add(std::move(key), cplx(t.at(1).get<double>(), t.at(2).get<double>()));
    }
    p.set_real_flag(j.value("real", false));
    return p;
  });
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace qlrg
