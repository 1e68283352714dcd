#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "eovsim/rng.hpp"

namespace eovsim {

// Organizations and their peers. Peer ids are globally unique.
struct Topology {
  struct Org {
    std::string org_id;
    std::vector<std::string> peers;
  };

  std::vector<Org> orgs;

  // Org1..OrgN with the given peer counts; peers named "Peer<j>.Org<i>".
  static Topology with_counts(const std::vector<int>& peers_per_org);

  const Org* find_org(const std::string& org_id) const;
  std::size_t total_peers() const;
};

struct PolicyNode;
using EndorsementPolicy = std::shared_ptr<const PolicyNode>;

struct PolicyNode {
  enum class Kind { Principal, And, Or, OutOf };

  Kind kind = Kind::Principal;
  std::string org_id;                            // Principal
  int k = 0;                                     // OutOf
  std::vector<EndorsementPolicy> children;       // And / Or / OutOf
};

struct PolicyParseError : std::runtime_error {
  std::size_t position;

  PolicyParseError(const std::string& message, std::size_t pos)
      : std::runtime_error(message + " (at offset " + std::to_string(pos) + ")"),
        position(pos) {}
};

// Grammar:  Expr := AND '(' Expr {',' Expr} ')'
//                 | OR '(' Expr {',' Expr} ')'
//                 | OutOf '(' int ',' Expr {',' Expr} ')'
//                 | '\'' OrgId '.member' '\''
// Keywords are case-insensitive ("Out-Of" is accepted for OutOf); whitespace
// is free. Throws PolicyParseError with the offending offset.
EndorsementPolicy parse_policy(const std::string& text);

std::string policy_to_string(const EndorsementPolicy& policy);

// Checks that every Principal references an org present in the topology.
void validate_policy(const EndorsementPolicy& policy, const Topology& topology);

// Minimal satisfying peer set, endorsers drawn uniformly at random:
// And = union over all children, Or = one uniformly chosen child,
// OutOf(k) = union over k uniformly chosen distinct children,
// Principal = one uniform peer of that org. Deterministic given the rng state.
std::set<std::string> select_endorsers(const EndorsementPolicy& policy,
                                       const Topology& topology, Rng& rng);

// Standard tree evaluation over the multiset of orgs that endorsed.
bool is_satisfied(const EndorsementPolicy& policy,
                  const std::multiset<std::string>& endorsing_orgs);

// Org of a peer id, using the topology (peer ids are unique).
const std::string& org_of_peer(const Topology& topology,
                               const std::string& peer_id);

}  // namespace eovsim
