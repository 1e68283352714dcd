#include "eovsim/policy.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace eovsim {

Topology Topology::with_counts(const std::vector<int>& peers_per_org) {
  Topology topo;
  for (std::size_t i = 0; i < peers_per_org.size(); ++i) {
    Org org;
    org.org_id = "Org" + std::to_string(i + 1);
    for (int j = 0; j < peers_per_org[i]; ++j)
      org.peers.push_back("Peer" + std::to_string(j) + "." + org.org_id);
    topo.orgs.push_back(std::move(org));
  }
  return topo;
}

const Topology::Org* Topology::find_org(const std::string& org_id) const {
  for (const auto& org : orgs)
    if (org.org_id == org_id) return &org;
  return nullptr;
}

std::size_t Topology::total_peers() const {
  std::size_t total = 0;
  for (const auto& org : orgs) total += org.peers.size();
  return total;
}

const std::string& org_of_peer(const Topology& topology,
                               const std::string& peer_id) {
  for (const auto& org : topology.orgs)
    for (const auto& peer : org.peers)
      if (peer == peer_id) return org.org_id;
  throw std::invalid_argument("unknown peer: " + peer_id);
}

namespace {

// Recursive-descent parser over the raw string; positions are byte offsets.
class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  EndorsementPolicy parse() {
    auto node = expr();
    skip_ws();
    if (pos_ != text_.size())
      throw PolicyParseError("trailing input after policy", pos_);
    return node;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  char peek() {
    skip_ws();
    if (pos_ >= text_.size())
      throw PolicyParseError("unexpected end of policy", pos_);
    return text_[pos_];
  }

  void expect(char c) {
    if (peek() != c)
      throw PolicyParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  // Keyword: letters with optional interior '-' ("Out-Of"), lowercased,
  // hyphens dropped.
  std::string keyword() {
    skip_ws();
    std::string word;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c))) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (c == '-' && !word.empty()) {
        // swallow the hyphen in "Out-Of"
      } else {
        break;
      }
      ++pos_;
    }
    return word;
  }

  int integer() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ == start) throw PolicyParseError("expected an integer", pos_);
    return std::stoi(text_.substr(start, pos_ - start));
  }

  EndorsementPolicy principal() {
    expect('\'');
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '\'') ++pos_;
    if (pos_ >= text_.size())
      throw PolicyParseError("unterminated principal quote", start);
    std::string body = text_.substr(start, pos_ - start);
    ++pos_;  // closing quote

    auto dot = body.rfind('.');
    if (dot == std::string::npos || dot == 0)
      throw PolicyParseError("principal must be 'Org.member'", start);
    std::string role = body.substr(dot + 1);
    std::transform(role.begin(), role.end(), role.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (role != "member")
      throw PolicyParseError("unsupported role '" + role + "'", start + dot + 1);

    auto node = std::make_shared<PolicyNode>();
    node->kind = PolicyNode::Kind::Principal;
    node->org_id = body.substr(0, dot);
    return node;
  }

  EndorsementPolicy expr() {
    if (peek() == '\'') return principal();

    std::size_t word_pos = pos_;
    std::string word = keyword();
    PolicyNode::Kind kind;
    if (word == "and") {
      kind = PolicyNode::Kind::And;
    } else if (word == "or") {
      kind = PolicyNode::Kind::Or;
    } else if (word == "outof") {
      kind = PolicyNode::Kind::OutOf;
    } else {
      throw PolicyParseError("expected AND, OR, OutOf, or a principal",
                             word_pos);
    }

    auto node = std::make_shared<PolicyNode>();
    node->kind = kind;
    expect('(');
    if (kind == PolicyNode::Kind::OutOf) {
      node->k = integer();
      expect(',');
    }
    node->children.push_back(expr());
    while (peek() == ',') {
      ++pos_;
      node->children.push_back(expr());
    }
    expect(')');

    if (kind == PolicyNode::Kind::OutOf &&
        (node->k < 1 ||
         node->k > static_cast<int>(node->children.size()))) {
      std::ostringstream msg;
      msg << "OutOf count " << node->k << " out of range 1.."
          << node->children.size();
      throw PolicyParseError(msg.str(), word_pos);
    }
    return node;
  }
};

}  // namespace

EndorsementPolicy parse_policy(const std::string& text) {
  return Parser(text).parse();
}

std::string policy_to_string(const EndorsementPolicy& policy) {
  switch (policy->kind) {
    case PolicyNode::Kind::Principal:
      return "'" + policy->org_id + ".member'";
    case PolicyNode::Kind::And:
    case PolicyNode::Kind::Or:
    case PolicyNode::Kind::OutOf: {
      std::string out =
          policy->kind == PolicyNode::Kind::And
              ? "AND("
              : (policy->kind == PolicyNode::Kind::Or ? "OR(" : "OutOf(");
      if (policy->kind == PolicyNode::Kind::OutOf)
        out += std::to_string(policy->k) + ",";
      for (std::size_t i = 0; i < policy->children.size(); ++i) {
        if (i) out += ",";
        out += policy_to_string(policy->children[i]);
      }
      return out + ")";
    }
  }
  return "?";
}

void validate_policy(const EndorsementPolicy& policy,
                     const Topology& topology) {
  if (policy->kind == PolicyNode::Kind::Principal) {
    if (!topology.find_org(policy->org_id))
      throw std::invalid_argument("policy references unknown org: " +
                                  policy->org_id);
    return;
  }
  for (const auto& child : policy->children) validate_policy(child, topology);
}

namespace {

void select_into(const EndorsementPolicy& policy, const Topology& topology,
                 Rng& rng, std::set<std::string>& out) {
  switch (policy->kind) {
    case PolicyNode::Kind::Principal: {
      const auto* org = topology.find_org(policy->org_id);
      if (!org)
        throw std::invalid_argument("policy references unknown org: " +
                                    policy->org_id);
      out.insert(org->peers[rng.uniform_index(org->peers.size())]);
      return;
    }
    case PolicyNode::Kind::And:
      for (const auto& child : policy->children)
        select_into(child, topology, rng, out);
      return;
    case PolicyNode::Kind::Or:
      select_into(policy->children[rng.uniform_index(policy->children.size())],
                  topology, rng, out);
      return;
    case PolicyNode::Kind::OutOf: {
      // partial Fisher-Yates: first k of a shuffled index array
      std::vector<std::size_t> order(policy->children.size());
      std::iota(order.begin(), order.end(), 0);
      for (int i = 0; i < policy->k; ++i) {
        auto j = i + rng.uniform_index(order.size() - i);
        std::swap(order[i], order[j]);
        select_into(policy->children[order[i]], topology, rng, out);
      }
      return;
    }
  }
}

}  // namespace

std::set<std::string> select_endorsers(const EndorsementPolicy& policy,
                                       const Topology& topology, Rng& rng) {
  std::set<std::string> out;
  select_into(policy, topology, rng, out);
  return out;
}

bool is_satisfied(const EndorsementPolicy& policy,
                  const std::multiset<std::string>& endorsing_orgs) {
  switch (policy->kind) {
    case PolicyNode::Kind::Principal:
      return endorsing_orgs.count(policy->org_id) > 0;
    case PolicyNode::Kind::And:
      return std::all_of(policy->children.begin(), policy->children.end(),
                         [&](const EndorsementPolicy& c) {
                           return is_satisfied(c, endorsing_orgs);
                         });
    case PolicyNode::Kind::Or:
      return std::any_of(policy->children.begin(), policy->children.end(),
                         [&](const EndorsementPolicy& c) {
                           return is_satisfied(c, endorsing_orgs);
                         });
    case PolicyNode::Kind::OutOf: {
      int satisfied = 0;
      for (const auto& child : policy->children)
        if (is_satisfied(child, endorsing_orgs)) ++satisfied;
      return satisfied >= policy->k;
    }
  }
  return false;
}

}  // namespace eovsim
