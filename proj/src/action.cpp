#include "relrl/action.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace relrl {

namespace {

bool completable(const Preconditions& pre, const ActionSchema& schema, int id, std::vector<int>& prefix) {
  if (schema.kind != ActionKind::parametric) return true;
  if (static_cast<int>(prefix.size()) == schema.arity) return true;
  const Mask mask = pre.parameter_mask(id, prefix);
  if (!schema.may_dead_end) return any(mask);
  for (int c = 0; c < static_cast<int>(mask.size()); ++c) {
    if (!mask[c]) continue;
    prefix.push_back(c);
    const bool ok = completable(pre, schema, id, prefix);
    prefix.pop_back();
    if (ok) return true;
  }
  return false;
}

double count_groundings(const Preconditions& pre, int id, int arity, std::vector<int>& prefix) {
  if (static_cast<int>(prefix.size()) == arity) return 1.0;
  const Mask mask = pre.parameter_mask(id, prefix);
  if (static_cast<int>(prefix.size()) + 1 == arity) return count(mask);
  double total = 0;
  for (int c = 0; c < static_cast<int>(mask.size()); ++c) {
    if (!mask[c]) continue;
    prefix.push_back(c);
    total += count_groundings(pre, id, arity, prefix);
    prefix.pop_back();
  }
  return total;
}

void check_schema_id(std::span<const ActionSchema> schemas, int id) {
  if (id < 0 || id >= static_cast<int>(schemas.size())) {
    fail(ErrorCode::invalid_argument, "action id " + std::to_string(id) + " out of range");
  }
}

}  // namespace

void validate_schemas(std::span<const ActionSchema> schemas) {
  if (schemas.empty()) fail(ErrorCode::schema, "no action schemas");
  for (const ActionSchema& s : schemas) {
    if (s.kind == ActionKind::parametric && s.arity < 1) {
      fail(ErrorCode::schema, "parametric schema '" + s.name + "' needs arity >= 1");
    }
    if (s.kind != ActionKind::parametric && s.arity != 0) {
      fail(ErrorCode::schema, "schema '" + s.name + "' takes no node parameters");
    }
  }
}

Mask effective_schema_mask(const Preconditions& pre, std::span<const ActionSchema> schemas) {
  Mask mask = pre.schema_mask();
  if (mask.size() != schemas.size()) fail(ErrorCode::dimension, "schema mask length differs from schema count");
  std::vector<int> prefix;
  for (int s = 0; s < static_cast<int>(schemas.size()); ++s) {
    if (mask[s] && !completable(pre, schemas[s], s, prefix)) mask[s] = 0;
  }
  return mask;
}

Mask effective_parameter_mask(const Preconditions& pre, std::span<const ActionSchema> schemas, int schema,
                              std::span<const int> chosen) {
  check_schema_id(schemas, schema);
  const ActionSchema& sc = schemas[schema];
  Mask mask = pre.parameter_mask(schema, chosen);
  if (static_cast<int>(mask.size()) != pre.node_count()) {
    fail(ErrorCode::dimension, "parameter mask length differs from node count");
  }
  if (!sc.may_dead_end) return mask;
  std::vector<int> prefix(chosen.begin(), chosen.end());
  for (int c = 0; c < static_cast<int>(mask.size()); ++c) {
    if (!mask[c]) continue;
    prefix.push_back(c);
    if (!completable(pre, sc, schema, prefix)) mask[c] = 0;
    prefix.pop_back();
  }
  return mask;
}

bool satisfies(const Preconditions& pre, std::span<const ActionSchema> schemas, const ActionChoice& action) {
  if (action.action_id < 0 || action.action_id >= static_cast<int>(schemas.size())) return false;
  if (!pre.schema_mask()[action.action_id]) return false;
  const ActionSchema& sc = schemas[action.action_id];
  const int n = pre.node_count();
  switch (sc.kind) {
    case ActionKind::elementary:
      return action.params.empty() && action.subset.empty();
    case ActionKind::set: {
      if (!action.params.empty() || static_cast<int>(action.subset.size()) != n) return false;
      const Mask allowed = pre.set_mask(action.action_id);
      for (int v = 0; v < n; ++v) {
        if (action.subset[v] && !allowed[v]) return false;
      }
      return true;
    }
    case ActionKind::parametric: {
      if (static_cast<int>(action.params.size()) != sc.arity || !action.subset.empty()) return false;
      for (int l = 0; l < sc.arity; ++l) {
        const int c = action.params[l];
        if (c < 0 || c >= n) return false;
        const Mask mask = pre.parameter_mask(action.action_id, std::span<const int>(action.params.data(), l));
        if (!mask[c]) return false;
      }
      return true;
    }
  }
  return false;
}

double log_action_count(const Preconditions& pre, std::span<const ActionSchema> schemas) {
  const Mask avail = pre.schema_mask();
  std::vector<double> logs;
  std::vector<int> prefix;
  for (int s = 0; s < static_cast<int>(schemas.size()); ++s) {
    if (!avail[s]) continue;
    switch (schemas[s].kind) {
      case ActionKind::elementary:
        logs.push_back(0.0);
        break;
      case ActionKind::set:
        logs.push_back(count(pre.set_mask(s)) * std::log(2.0));
        break;
      case ActionKind::parametric: {
        const double c = count_groundings(pre, s, schemas[s].arity, prefix);
        if (c > 0) logs.push_back(std::log(c));
        break;
      }
    }
  }
  if (logs.empty()) fail(ErrorCode::no_valid_action, "no grounded action is available");
  const double mx = *std::max_element(logs.begin(), logs.end());
  double total = 0;
  for (double l : logs) total += std::exp(l - mx);
  return mx + std::log(total);
}

std::vector<ActionChoice> enumerate_actions(const Preconditions& pre, std::span<const ActionSchema> schemas,
                                            std::size_t limit) {
  std::vector<ActionChoice> out;
  const int n = pre.node_count();
  auto push = [&](ActionChoice a) {
    if (out.size() >= limit) fail(ErrorCode::invalid_argument, "enumerate_actions: more than limit actions");
    out.push_back(std::move(a));
  };
  const Mask avail = pre.schema_mask();
  for (int s = 0; s < static_cast<int>(schemas.size()); ++s) {
    if (!avail[s]) continue;
    const ActionSchema& sc = schemas[s];
    if (sc.kind == ActionKind::elementary) {
      ActionChoice a;
      a.action_id = s;
      push(std::move(a));
    } else if (sc.kind == ActionKind::set) {
      const Mask allowed = pre.set_mask(s);
      std::vector<int> free;
      for (int v = 0; v < n; ++v) {
        if (allowed[v]) free.push_back(v);
      }
      if (free.size() >= 63 || (std::size_t{1} << free.size()) > limit) {
        fail(ErrorCode::invalid_argument, "enumerate_actions: more than limit actions");
      }
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << free.size()); ++bits) {
        ActionChoice a;
        a.action_id = s;
        a.subset.assign(n, 0);
        for (std::size_t k = 0; k < free.size(); ++k) {
          if (bits >> k & 1u) a.subset[free[k]] = 1;
        }
        push(std::move(a));
      }
    } else {
      std::vector<int> prefix;
      auto recurse = [&](auto&& self) -> void {
        if (static_cast<int>(prefix.size()) == sc.arity) {
          ActionChoice a;
          a.action_id = s;
          a.params = prefix;
          push(std::move(a));
          return;
        }
        const Mask mask = pre.parameter_mask(s, prefix);
        for (int c = 0; c < n; ++c) {
          if (!mask[c]) continue;
          prefix.push_back(c);
          self(self);
          prefix.pop_back();
        }
      };
      recurse(recurse);
    }
  }
  return out;
}

}  // namespace relrl
