#include "coherelab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "coherelab/error.hpp"
#include "coherelab/random.hpp"

namespace coherelab::synth {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double q) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q); }

double round_to(double value, double scale) { return std::round(value * scale) / scale; }

[[noreturn]] void infeasible(const std::string& why) { throw Error(ErrorCode::InfeasibleSpec, why); }

void check_spec(const SynthSpec& spec) {
  if (spec.n_clients == 0 || spec.sessions_per_client == 0) infeasible("client and session counts must be positive");
  if (spec.n_clients * spec.sessions_per_client < 3) infeasible("at least 3 sessions are needed for a correlation");
  for (const CountRange* r : {&spec.utterances_per_session, &spec.tokens_per_utterance}) {
    if (r->min == 0 || r->min > r->max) infeasible("count ranges need 0 < min <= max");
  }
  for (double t : {spec.r_pos, spec.r_neg, spec.a_pos, spec.a_neg}) {
    if (!(t >= -1.0 && t <= 1.0)) infeasible("correlation targets must lie in [-1, 1]");
  }
  if (spec.a_pos * spec.a_pos + spec.a_neg * spec.a_neg > 1.0 + 1e-12) {
    infeasible("a_pos^2 + a_neg^2 must not exceed 1");
  }
  double skew_sum = 0.0;
  for (double s : spec.label_skew) {
    if (!(s >= 0.0)) infeasible("label_skew entries must be nonnegative");
    skew_sum += s;
  }
  if (std::fabs(skew_sum - 1.0) > 1e-9) infeasible("label_skew must sum to 1");
  if (spec.vocab_size == 0) infeasible("vocab_size must be positive");
  if (!(spec.shared_vocab_rate >= 0.0 && spec.shared_vocab_rate <= 1.0)) {
    infeasible("shared_vocab_rate must lie in [0, 1]");
  }
  if (!(spec.poms_subscale_max > 0.0)) infeasible("poms_subscale_max must be positive");
  if ((spec.r_pos != 0.0 || spec.r_neg != 0.0) && spec.utterances_per_session.min < 2) {
    infeasible("a nonzero coherence target needs at least 2 client utterances per session");
  }
  if ((spec.a_pos != 0.0 || spec.a_neg != 0.0) &&
      (spec.sessions_per_client < 3 || spec.n_clients < 3)) {
    infeasible("a nonzero association target needs >= 3 clients with >= 3 sessions each");
  }
  if (spec.r_pos != 0.0 && spec.label_skew[index_of(EmotionLabel::Positive)] == 0.0) {
    infeasible("r_pos needs positive labels in label_skew");
  }
  if (spec.r_neg != 0.0 && spec.label_skew[index_of(EmotionLabel::Negative)] == 0.0) {
    infeasible("r_neg needs negative labels in label_skew");
  }
}

// Largest-remainder apportionment of `total` items; ties go to the earlier label.
std::array<std::size_t, kNumLabels> apportion(const LabelScores& shares, std::size_t total) {
  std::array<std::size_t, kNumLabels> counts{};
  std::array<double, kNumLabels> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, kNumLabels> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % kNumLabels]];
  return counts;
}

// Direct-definition Pearson in extended precision.
std::optional<double> direct_pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  long double mx = 0;
  long double my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<long double>(n);
  my /= static_cast<long double>(n);
  long double sxy = 0;
  long double sxx = 0;
  long double syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = xs[i] - mx;
    const long double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const bool x_constant = std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs.front(); });
  const bool y_constant = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys.front(); });
  if (x_constant || y_constant) return std::nullopt;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::size_t width_for(std::size_t count) {
  return std::max<std::size_t>(3, std::to_string(count > 0 ? count - 1 : 0).size());
}

constexpr std::array<std::string_view, kNumLabels> kVocabPrefix = {"pos", "neg", "neu", "mix"};

std::string make_text(Rng& rng, const SynthSpec& spec, std::string_view prefix) {
  const auto n = static_cast<std::size_t>(
      rng.uniform_int(spec.tokens_per_utterance.min, spec.tokens_per_utterance.max));
  std::string text;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) text.push_back(' ');
    const bool shared = rng.uniform01() < spec.shared_vocab_rate;
    text += shared ? "com" : std::string(prefix);
    text += std::to_string(rng.uniform_index(spec.vocab_size));
  }
  return text;
}

std::vector<double> standardized(const std::vector<std::optional<double>>& values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  std::vector<double> out(values.size(), 0.0);
  if (present.size() < 2) return out;
  const double mean = std::accumulate(present.begin(), present.end(), 0.0) / static_cast<double>(present.size());
  double ss = 0.0;
  for (double v : present) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(present.size() - 1));
  if (!(sd > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) out[i] = (*values[i] - mean) / sd;
  }
  return out;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);

  const double skew_pos = spec.label_skew[index_of(EmotionLabel::Positive)];
  const double skew_neg = spec.label_skew[index_of(EmotionLabel::Negative)];
  const double skew_neu = spec.label_skew[index_of(EmotionLabel::Neutral)];
  const double skew_mix = spec.label_skew[index_of(EmotionLabel::Mixed)];
  // Caps keep the uniform-margined shares inside the simplex with the
  // requested means where possible.
  const double cap_scale = skew_pos + skew_neg > 0.5 ? 0.5 / (skew_pos + skew_neg) : 1.0;
  const double cap_pos = 2.0 * skew_pos * cap_scale;
  const double cap_neg = 2.0 * skew_neg * cap_scale;
  const double neu_share = skew_neu + skew_mix > 0.0 ? skew_neu / (skew_neu + skew_mix) : 0.5;
  const double resolution = 2.0 * static_cast<double>(spec.utterances_per_session.max);

  SynthOutput out;
  GroundTruth& truth = out.truth;
  truth.spec = spec;
  auto gaussian_rho = [](double r) {
    return std::fabs(r) == 1.0 ? r : 2.0 * std::sin(std::numbers::pi * r / 6.0);
  };
  truth.gaussian_rho_pos = gaussian_rho(spec.r_pos);
  truth.gaussian_rho_neg = gaussian_rho(spec.r_neg);

  // Realized share -> Gaussian score -> copula partner on the POMS side.
  const double min_len = static_cast<double>(spec.utterances_per_session.min);
  auto poms_level = [&](double share, double map_cap, double rho) {
    // A deterministic plant must stay affine in the share, so it skips the clip.
    if (std::fabs(rho) == 1.0) map_cap = std::min(1.0, map_cap + 1.0 / min_len);
    const double level01 = map_cap > 0.0 ? std::min(1.0, share / map_cap) : 0.0;
    const double q = (level01 * resolution + 0.5) / (resolution + 1.0);
    const double z = normal_quantile(q);
    const double mixed = rho * z + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * rng.normal();
    const double level = round_to(spec.poms_subscale_max * normal_cdf(mixed), 1e6);
    return std::clamp(level, 0.0, spec.poms_subscale_max);
  };

  const std::size_t client_width = width_for(spec.n_clients);
  const std::size_t session_width = std::max<std::size_t>(2, width_for(spec.sessions_per_client) - 1);

  for (std::size_t c = 0; c < spec.n_clients; ++c) {
    const std::string client_id = "c" + padded(c, client_width);
    for (std::size_t m = 0; m < spec.sessions_per_client; ++m) {
      SessionRecord session;
      session.client_id = client_id;
      session.session_index = m;
      session.session_id = client_id + "-s" + padded(m, session_width);

      SessionTruth st;
      st.session_id = session.session_id;
      st.client_id = client_id;
      st.session_index = m;
      st.u_pos_latent = cap_pos * normal_cdf(rng.normal());
      st.u_neg_latent = cap_neg * normal_cdf(rng.normal());
      const double rest = std::max(0.0, 1.0 - st.u_pos_latent - st.u_neg_latent);
      const LabelScores shares{st.u_pos_latent, st.u_neg_latent, rest * neu_share, rest * (1.0 - neu_share)};

      const auto length = static_cast<std::size_t>(
          rng.uniform_int(spec.utterances_per_session.min, spec.utterances_per_session.max));
      const auto counts = apportion(shares, length);
      st.u_pos = static_cast<double>(counts[index_of(EmotionLabel::Positive)]) / static_cast<double>(length);
      st.u_neg = static_cast<double>(counts[index_of(EmotionLabel::Negative)]) / static_cast<double>(length);

      const double pos_level = poms_level(st.u_pos, cap_pos, truth.gaussian_rho_pos);
      const double neg_level = poms_level(st.u_neg, cap_neg, truth.gaussian_rho_neg);
      session.poms = PomsReport{pos_level, pos_level, pos_level, neg_level, neg_level, neg_level};
      st.p_pos = pos_level + pos_level + pos_level;
      st.p_neg = neg_level + neg_level + neg_level;

      std::vector<EmotionLabel> labels;
      for (EmotionLabel l : kAllLabels) labels.insert(labels.end(), counts[index_of(l)], l);
      rng.shuffle(labels);
      for (std::size_t i = 0; i < length; ++i) {
        Utterance therapist;
        therapist.session_id = session.session_id;
        therapist.utterance_index = 2 * i;
        therapist.speaker = Speaker::Therapist;
        therapist.text = make_text(rng, spec, "thr");
        session.utterances.push_back(std::move(therapist));

        Utterance client;
        client.session_id = session.session_id;
        client.utterance_index = 2 * i + 1;
        client.speaker = Speaker::Client;
        client.text = make_text(rng, spec, kVocabPrefix[index_of(labels[i])]);
        client.gold_label = labels[i];
        session.utterances.push_back(std::move(client));
      }
      out.bundle.sessions.push_back(std::move(session));
      truth.sessions.push_back(std::move(st));
    }
  }

  // Client level: plant well-being against the realized within-client coherence.
  std::vector<std::optional<double>> coherence_pos;
  std::vector<std::optional<double>> coherence_neg;
  for (std::size_t c = 0; c < spec.n_clients; ++c) {
    std::vector<double> up, pp, un, pn;
    for (std::size_t m = 0; m < spec.sessions_per_client; ++m) {
      const SessionTruth& st = truth.sessions[c * spec.sessions_per_client + m];
      up.push_back(st.u_pos);
      pp.push_back(st.p_pos);
      un.push_back(st.u_neg);
      pn.push_back(st.p_neg);
    }
    coherence_pos.push_back(direct_pearson(up, pp));
    coherence_neg.push_back(direct_pearson(un, pn));
  }
  const std::vector<double> z_pos = standardized(coherence_pos);
  const std::vector<double> z_neg = standardized(coherence_neg);
  const double noise_weight = std::sqrt(std::max(0.0, 1.0 - spec.a_pos * spec.a_pos - spec.a_neg * spec.a_neg));

  for (std::size_t c = 0; c < spec.n_clients; ++c) {
    ClientTruth ct;
    ct.client_id = truth.sessions[c * spec.sessions_per_client].client_id;
    ct.coherence_pos = coherence_pos[c];
    ct.coherence_neg = coherence_neg[c];
    ct.wellbeing_latent = spec.a_pos * z_pos[c] + spec.a_neg * z_neg[c] + noise_weight * rng.normal();
    const double target_mean = std::clamp(20.0 + 5.0 * ct.wellbeing_latent, 4.0, 36.0);

    std::vector<double> jitter(spec.sessions_per_client);
    for (double& j : jitter) j = rng.normal();
    const double jitter_mean = std::accumulate(jitter.begin(), jitter.end(), 0.0) / static_cast<double>(jitter.size());
    double total_sum = 0.0;
    for (std::size_t m = 0; m < spec.sessions_per_client; ++m) {
      const std::size_t s = c * spec.sessions_per_client + m;
      const double session_total = target_mean + std::clamp(1.5 * (jitter[m] - jitter_mean), -3.5, 3.5);
      const double scale = std::clamp(round_to(session_total / 4.0, 100.0), 0.0, 10.0);
      const OrsReport ors = OrsReport::from_scales({scale, scale, scale, scale});
      out.bundle.sessions[s].ors = ors;
      truth.sessions[s].ors_total = ors.total;
      total_sum += ors.total;
    }
    ct.mean_ors = total_sum / static_cast<double>(spec.sessions_per_client);
    truth.clients.push_back(std::move(ct));
  }
  return out;
}

RealizedCorrelations realized_correlations(const GroundTruth& truth) {
  std::vector<double> up, un, pp, pn, lp, ln;
  for (const SessionTruth& s : truth.sessions) {
    up.push_back(s.u_pos);
    un.push_back(s.u_neg);
    pp.push_back(s.p_pos);
    pn.push_back(s.p_neg);
    lp.push_back(s.u_pos_latent);
    ln.push_back(s.u_neg_latent);
  }
  RealizedCorrelations r;
  r.session_pos = direct_pearson(up, pp);
  r.session_neg = direct_pearson(un, pn);
  r.session_pos_latent = direct_pearson(lp, pp);
  r.session_neg_latent = direct_pearson(ln, pn);

  std::vector<double> cp, op, cn, on;
  for (const ClientTruth& c : truth.clients) {
    if (c.coherence_pos) {
      cp.push_back(*c.coherence_pos);
      op.push_back(c.mean_ors);
    }
    if (c.coherence_neg) {
      cn.push_back(*c.coherence_neg);
      on.push_back(c.mean_ors);
    }
  }
  r.association_pos = direct_pearson(cp, op);
  r.association_neg = direct_pearson(cn, on);
  return r;
}

SynthSpec parse_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("synth spec: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "synth spec must be a JSON object");
  static const std::set<std::string> kKnown = {
      "n_clients", "sessions_per_client", "utterances_per_session", "tokens_per_utterance",
      "r_pos",     "r_neg",               "a_pos",                  "a_neg",
      "label_skew", "vocab_size",         "shared_vocab_rate",      "poms_subscale_max",
      "seed"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!kKnown.contains(it.key())) {
      throw Error(ErrorCode::SchemaViolation, "synth spec: unknown field '" + it.key() + "'");
    }
  }
  SynthSpec spec;
  try {
    auto range = [&](const char* key, CountRange& target) {
      if (!doc.contains(key)) return;
      target.min = doc[key].at("min").get<std::size_t>();
      target.max = doc[key].at("max").get<std::size_t>();
    };
    auto number = [&](const char* key, auto& target) {
      if (doc.contains(key)) target = doc[key].get<std::remove_reference_t<decltype(target)>>();
    };
    number("n_clients", spec.n_clients);
    number("sessions_per_client", spec.sessions_per_client);
    range("utterances_per_session", spec.utterances_per_session);
    range("tokens_per_utterance", spec.tokens_per_utterance);
    number("r_pos", spec.r_pos);
    number("r_neg", spec.r_neg);
    number("a_pos", spec.a_pos);
    number("a_neg", spec.a_neg);
    number("vocab_size", spec.vocab_size);
    number("shared_vocab_rate", spec.shared_vocab_rate);
    number("poms_subscale_max", spec.poms_subscale_max);
    number("seed", spec.seed);
    if (doc.contains("label_skew")) {
      for (EmotionLabel l : kAllLabels) {
        spec.label_skew[index_of(l)] = doc["label_skew"].at(std::string(to_string(l))).get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("synth spec: ") + e.what());
  }
  return spec;
}

namespace {

ordered_json spec_json(const SynthSpec& spec) {
  ordered_json j;
  j["n_clients"] = spec.n_clients;
  j["sessions_per_client"] = spec.sessions_per_client;
  j["utterances_per_session"] = {{"min", spec.utterances_per_session.min},
                                 {"max", spec.utterances_per_session.max}};
  j["tokens_per_utterance"] = {{"min", spec.tokens_per_utterance.min},
                               {"max", spec.tokens_per_utterance.max}};
  j["r_pos"] = spec.r_pos;
  j["r_neg"] = spec.r_neg;
  j["a_pos"] = spec.a_pos;
  j["a_neg"] = spec.a_neg;
  ordered_json skew;
  for (EmotionLabel l : kAllLabels) skew[std::string(to_string(l))] = spec.label_skew[index_of(l)];
  j["label_skew"] = skew;
  j["vocab_size"] = spec.vocab_size;
  j["shared_vocab_rate"] = spec.shared_vocab_rate;
  j["poms_subscale_max"] = spec.poms_subscale_max;
  j["seed"] = spec.seed;
  return j;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string spec_to_json(const SynthSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

std::string ground_truth_to_json(const GroundTruth& truth) {
  const RealizedCorrelations realized = realized_correlations(truth);
  ordered_json doc;
  doc["spec"] = spec_json(truth.spec);
  doc["gaussian_rho_pos"] = truth.gaussian_rho_pos;
  doc["gaussian_rho_neg"] = truth.gaussian_rho_neg;
  ordered_json r;
  r["session_pos"] = optional_number(realized.session_pos);
  r["session_neg"] = optional_number(realized.session_neg);
  r["session_pos_latent"] = optional_number(realized.session_pos_latent);
  r["session_neg_latent"] = optional_number(realized.session_neg_latent);
  r["association_pos"] = optional_number(realized.association_pos);
  r["association_neg"] = optional_number(realized.association_neg);
  doc["realized"] = r;
  ordered_json sessions = ordered_json::array();
  for (const SessionTruth& s : truth.sessions) {
    ordered_json j;
    j["session_id"] = s.session_id;
    j["client_id"] = s.client_id;
    j["session_index"] = s.session_index;
    j["u_pos_latent"] = s.u_pos_latent;
    j["u_neg_latent"] = s.u_neg_latent;
    j["u_pos"] = s.u_pos;
    j["u_neg"] = s.u_neg;
    j["p_pos"] = s.p_pos;
    j["p_neg"] = s.p_neg;
    j["ors_total"] = s.ors_total;
    sessions.push_back(j);
  }
  doc["sessions"] = sessions;
  ordered_json clients = ordered_json::array();
  for (const ClientTruth& c : truth.clients) {
    ordered_json j;
    j["client_id"] = c.client_id;
    j["coherence_pos"] = optional_number(c.coherence_pos);
    j["coherence_neg"] = optional_number(c.coherence_neg);
    j["wellbeing_latent"] = c.wellbeing_latent;
    j["mean_ors"] = c.mean_ors;
    clients.push_back(j);
  }
  doc["clients"] = clients;
  return doc.dump(2) + "\n";
}

}  // namespace coherelab::synth
