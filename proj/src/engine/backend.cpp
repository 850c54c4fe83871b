#include "oprm/engine/backend.hpp"

#include "oprm/core/forward.hpp"
#include "oprm/errors.hpp"

namespace oprm::engine {

namespace {

struct ModelSession final : SessionState {
  explicit ModelSession(HiddenState s) : hidden(std::move(s)) {}
  std::unique_ptr<SessionState> clone() const override { return std::make_unique<ModelSession>(hidden); }
  HiddenState hidden;
};

ModelSession& as_model(SessionState& s) {
  auto* m = dynamic_cast<ModelSession*>(&s);
  if (!m) throw UsageError("session state was not produced by a model backend");
  return *m;
}

}  // namespace

PrefillResult ModelBackend::prefill(std::span<const TokenId> tokens) const {
  auto [state, dist] = model_prefill(params_, tokens);
  return {std::make_unique<ModelSession>(std::move(state)), std::move(dist)};
}

OutputDistribution ModelBackend::step(SessionState& state, TokenId token) const {
  return model_step(params_, as_model(state).hidden, token);
}

const HiddenState& ModelBackend::hidden(const SessionState& state) {
  return as_model(const_cast<SessionState&>(state)).hidden;
}

}  // namespace oprm::engine
