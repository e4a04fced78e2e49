#pragma once

// Deterministic generator of a schema-compatible stand-in for the UCI chronic
// kidney disease file: 400 rows (250 ckd / 150 notckd), the same 24 features
// plus a binary class column, per-feature missingness and the raw file's
// token dirt (tab prefixes, "\t?"). Class-conditional distributions follow
// published summary ranges; `pot` is generated class-independent. Intended for
// demos and tests when the original UCI file is not available locally.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ckd/rng.hpp"

namespace ckd {

inline constexpr std::uint64_t kSynthDefaultSeed = 20240809;

namespace synth_detail {

inline double clip(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline std::string num(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

inline std::string pick(Rng& rng, const std::vector<std::pair<std::string, double>>& table) {
  double u = rng.uniform01();
  for (const auto& [value, p] : table) {
    if (u < p) return value;
    u -= p;
  }
  return table.back().first;
}

}  // namespace synth_detail

inline std::string generate_ckd_arff(std::uint64_t seed = kSynthDefaultSeed) {
  using synth_detail::clip;
  using synth_detail::num;
  using synth_detail::pick;

  Rng rng(seed);
  std::string out;
  out += "% Synthetic stand-in for the UCI chronic kidney disease dataset.\n";
  out += "% Schema-compatible with the original file; deterministic; not real patient data.\n";
  out += "@relation Chronic_Kidney_Disease\n";
  const char* header =
      "@attribute 'age' numeric\n"
      "@attribute 'bp' numeric\n"
      "@attribute 'sg' numeric\n"
      "@attribute 'al' numeric\n"
      "@attribute 'su' numeric\n"
      "@attribute 'rbc' {normal,abnormal}\n"
      "@attribute 'pc' {normal,abnormal}\n"
      "@attribute 'pcc' {present,notpresent}\n"
      "@attribute 'ba' {present,notpresent}\n"
      "@attribute 'bgr' numeric\n"
      "@attribute 'bu' numeric\n"
      "@attribute 'sc' numeric\n"
      "@attribute 'sod' numeric\n"
      "@attribute 'pot' numeric\n"
      "@attribute 'hemo' numeric\n"
      "@attribute 'pcv' numeric\n"
      "@attribute 'wbcc' numeric\n"
      "@attribute 'rbcc' numeric\n"
      "@attribute 'htn' {yes,no}\n"
      "@attribute 'dm' {yes,no}\n"
      "@attribute 'cad' {yes,no}\n"
      "@attribute 'appet' {good,poor}\n"
      "@attribute 'pe' {yes,no}\n"
      "@attribute 'ane' {yes,no}\n"
      "@attribute 'class' {ckd,notckd}\n"
      "@data\n";
  out += header;

  // Per-feature missing probabilities, roughly matching the original file.
  const double miss[24] = {0.02, 0.03, 0.12, 0.11, 0.12, 0.38, 0.16, 0.01,
                           0.01, 0.11, 0.05, 0.04, 0.22, 0.22, 0.13, 0.17,
                           0.26, 0.32, 0.005, 0.005, 0.005, 0.0025, 0.0025, 0.0025};

  for (int row = 0; row < 400; ++row) {
    const bool ckd = row < 250;
    std::vector<std::string> cells(25);

    const double age = ckd ? rng.normal() * 13.0 + 60.0 : rng.normal() * 16.0 + 46.0;
    cells[0] = num(clip(std::round(age), 2, 90), 0);
    const double bp = ckd ? rng.normal() * 14.0 + 79.0 : rng.normal() * 9.0 + 71.0;
    cells[1] = num(clip(std::round(bp / 10.0) * 10.0, 50, 180), 0);
    cells[2] = ckd ? pick(rng, {{"1.005", 0.12},
                                {"1.010", 0.30},
                                {"1.015", 0.25},
                                {"1.020", 0.23},
                                {"1.025", 0.10}})
                   : pick(rng, {{"1.020", 0.48}, {"1.025", 0.52}});
    cells[3] = ckd ? pick(rng, {{"0", 0.23},
                                {"1", 0.18},
                                {"2", 0.17},
                                {"3", 0.17},
                                {"4", 0.18},
                                {"5", 0.07}})
                   : "0";
    cells[4] = ckd ? pick(rng, {{"0", 0.62},
                                {"1", 0.09},
                                {"2", 0.09},
                                {"3", 0.09},
                                {"4", 0.07},
                                {"5", 0.04}})
                   : "0";
    cells[5] = ckd ? pick(rng, {{"abnormal", 0.35}, {"normal", 0.65}})
                   : pick(rng, {{"abnormal", 0.02}, {"normal", 0.98}});
    cells[6] = ckd ? pick(rng, {{"abnormal", 0.42}, {"normal", 0.58}})
                   : pick(rng, {{"abnormal", 0.02}, {"normal", 0.98}});
    cells[7] = ckd ? pick(rng, {{"present", 0.22}, {"notpresent", 0.78}})
                   : pick(rng, {{"present", 0.01}, {"notpresent", 0.99}});
    cells[8] = ckd ? pick(rng, {{"present", 0.13}, {"notpresent", 0.87}})
                   : pick(rng, {{"present", 0.01}, {"notpresent", 0.99}});
    const double bgr = ckd ? std::exp(rng.normal() * 0.42 + std::log(160.0))
                           : rng.normal() * 12.0 + 107.0;
    cells[9] = num(clip(std::round(bgr), 70, 500), 0);
    const double bu = ckd ? std::exp(rng.normal() * 0.55 + std::log(60.0))
                          : rng.normal() * 10.0 + 33.0;
    cells[10] = num(clip(std::round(bu), 10, 309), 0);
    const double sc = ckd ? std::exp(rng.normal() * 0.75 + std::log(3.0))
                          : rng.normal() * 0.25 + 0.9;
    cells[11] = num(clip(std::round(sc * 10.0) / 10.0, 0.4, 48.0), 1);
    const double sod = ckd ? rng.normal() * 6.5 + 133.5 : rng.normal() * 3.5 + 141.5;
    cells[12] = num(clip(std::round(sod), 104, 150), 0);
    // pot carries no class signal at all.
    const double pot = rng.normal() * 0.65 + 4.45;
    cells[13] = num(clip(std::round(pot * 10.0) / 10.0, 2.5, 7.5), 1);
    const double hemo = ckd ? rng.normal() * 2.1 + 10.8 : rng.normal() * 1.25 + 15.2;
    const double hemo_c = clip(std::round(hemo * 10.0) / 10.0, 3.1, 17.8);
    cells[14] = num(hemo_c, 1);
    const double pcv = hemo_c * 3.0 + rng.normal() * 1.2;
    cells[15] = num(clip(std::round(pcv), 9, 54), 0);
    const double wbcc = ckd ? rng.normal() * 3000.0 + 9100.0 : rng.normal() * 1750.0 + 7700.0;
    cells[16] = num(clip(std::round(wbcc / 100.0) * 100.0, 2200, 26400), 0);
    const double rbcc = ckd ? rng.normal() * 0.9 + 3.95 : rng.normal() * 0.6 + 5.35;
    cells[17] = num(clip(std::round(rbcc * 10.0) / 10.0, 2.1, 8.0), 1);
    cells[18] = ckd ? pick(rng, {{"yes", 0.59}, {"no", 0.41}}) : "no";
    cells[19] = ckd ? pick(rng, {{"yes", 0.54}, {"no", 0.46}}) : "no";
    cells[20] = ckd ? pick(rng, {{"yes", 0.136}, {"no", 0.864}}) : "no";
    cells[21] = ckd ? pick(rng, {{"poor", 0.33}, {"good", 0.67}}) : "good";
    cells[22] = ckd ? pick(rng, {{"yes", 0.30}, {"no", 0.70}}) : "no";
    cells[23] = ckd ? pick(rng, {{"yes", 0.24}, {"no", 0.76}}) : "no";
    cells[24] = ckd ? "ckd" : "notckd";

    for (int c = 0; c < 24; ++c) {
      if (rng.uniform01() < miss[c]) {
        cells[c] = rng.uniform01() < 0.2 ? "\t?" : "?";
      } else {
        // The real file carries stray tabs and spaces; reproduce a little.
        const double dirt = rng.uniform01();
        if (dirt < 0.01)
          cells[c] = "\t" + cells[c];
        else if (dirt < 0.02)
          cells[c] += " ";
      }
    }
    for (int c = 0; c < 25; ++c) {
      out += cells[c];
      out += (c == 24) ? '\n' : ',';
    }
  }
  return out;
}

}  // namespace ckd
