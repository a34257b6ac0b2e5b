#include "riskplan/gait.hpp"

#include <string>

#include "riskplan/errors.hpp"

namespace riskplan::planner {

const char* to_string(LimbPhase p) {
  switch (p) {
    case LimbPhase::Old: return "old";
    case LimbPhase::Swing: return "swing";
    case LimbPhase::New: return "new";
  }
  return "unknown";
}

bool GaitSchedule::contact(int instant_in_round, int limb) const {
  return phases.at(static_cast<std::size_t>(instant_in_round)).at(static_cast<std::size_t>(limb)) !=
         LimbPhase::Swing;
}

int GaitSchedule::contacts(int instant_in_round) const {
  int n = 0;
  for (int i = 0; i < limb_count(); ++i) n += contact(instant_in_round, i) ? 1 : 0;
  return n;
}

std::vector<int> GaitSchedule::swing_limbs(int instant_in_round) const {
  std::vector<int> out;
  for (int i = 0; i < limb_count(); ++i) {
    if (!contact(instant_in_round, i)) out.push_back(i);
  }
  return out;
}

std::vector<int> GaitSchedule::contacts_per_instant() const {
  std::vector<int> out;
  for (int k = 0; k < instants_per_round(); ++k) out.push_back(contacts(k));
  return out;
}

void GaitSchedule::validate(int limbs) const {
  if (rounds < 1) throw InvalidInput("gait: rounds must be >= 1");
  if (phases.empty()) throw InvalidInput("gait: no instants");
  for (const auto& row : phases) {
    if (static_cast<int>(row.size()) != limbs) {
      throw InvalidInput("gait: every instant needs " + std::to_string(limbs) + " limb phases");
    }
  }
  for (int k = 0; k < instants_per_round(); ++k) {
    if (contacts(k) < 3) throw InvalidInput("gait: instant " + std::to_string(k) + " has fewer than 3 contacts");
  }
  for (int i = 0; i < limbs; ++i) {
    int stage = 0;  // 0 old, 1 swing, 2 new
    bool swung = false;
    for (int k = 0; k < instants_per_round(); ++k) {
      const LimbPhase p = phases[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      const int s = p == LimbPhase::Old ? 0 : p == LimbPhase::Swing ? 1 : 2;
      if (s < stage) throw InvalidInput("gait: limb " + std::to_string(i) + " phases must follow old, swing, new");
      if (s == 2 && !swung) throw InvalidInput("gait: limb " + std::to_string(i) + " lands without swinging");
      swung = swung || s == 1;
      stage = s;
    }
    if (!swung) throw InvalidInput("gait: limb " + std::to_string(i) + " never swings");
  }
}

GaitSchedule GaitSchedule::one_leg(int limbs, int rounds) {
  GaitSchedule g;
  g.name = "one-leg";
  g.rounds = rounds;
  for (int k = 0; k < limbs; ++k) {
    std::vector<LimbPhase> lift(static_cast<std::size_t>(limbs));
    std::vector<LimbPhase> place(static_cast<std::size_t>(limbs));
    for (int i = 0; i < limbs; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      lift[ui] = i < k ? LimbPhase::New : i == k ? LimbPhase::Swing : LimbPhase::Old;
      place[ui] = i <= k ? LimbPhase::New : LimbPhase::Old;
    }
    g.phases.push_back(lift);
    g.phases.push_back(place);
  }
  return g;
}

GaitSchedule GaitSchedule::tripod(int rounds) {
  using P = LimbPhase;
  GaitSchedule g;
  g.name = "tripod";
  g.rounds = rounds;
  g.phases = {
      {P::Swing, P::Old, P::Swing, P::Old, P::Swing, P::Old},
      {P::New, P::Old, P::New, P::Old, P::New, P::Old},
      {P::New, P::Swing, P::New, P::Swing, P::New, P::Swing},
      {P::New, P::New, P::New, P::New, P::New, P::New},
  };
  return g;
}

}  // namespace riskplan::planner
