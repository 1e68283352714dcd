#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>
#include <string>
#include <vector>

#include "eovsim/policy.hpp"
#include "eovsim/rng.hpp"

using namespace eovsim;

namespace {

// Frequency of each distinct selection set over `trials` draws.
std::map<std::set<std::string>, double> selection_frequencies(
    const EndorsementPolicy& policy, const Topology& topo, int trials,
    std::uint64_t seed) {
  std::map<std::set<std::string>, double> freq;
  Rng rng(seed);
  for (int i = 0; i < trials; ++i)
    freq[select_endorsers(policy, topo, rng)] += 1.0 / trials;
  return freq;
}

std::multiset<std::string> orgs_of(const Topology& topo,
                                   const std::set<std::string>& peers) {
  std::multiset<std::string> orgs;
  for (const auto& p : peers) orgs.insert(org_of_peer(topo, p));
  return orgs;
}

}  // namespace

TEST_CASE("parses the two-org AND policy") {
  auto p = parse_policy("AND('Org1.member','Org2.member')");
  REQUIRE(p->kind == PolicyNode::Kind::And);
  REQUIRE(p->children.size() == 2);
  CHECK(p->children[0]->kind == PolicyNode::Kind::Principal);
  CHECK(p->children[0]->org_id == "Org1");
  CHECK(p->children[1]->org_id == "Org2");
}

TEST_CASE("parses nested OR with an AND child") {
  auto p = parse_policy("OR('Org1.member', AND('Org2.member','Org3.member'))");
  REQUIRE(p->kind == PolicyNode::Kind::Or);
  REQUIRE(p->children.size() == 2);
  CHECK(p->children[0]->org_id == "Org1");
  REQUIRE(p->children[1]->kind == PolicyNode::Kind::And);
  CHECK(p->children[1]->children[0]->org_id == "Org2");
  CHECK(p->children[1]->children[1]->org_id == "Org3");
}

TEST_CASE("degenerate single-child AND parses") {
  auto p = parse_policy("AND('Org1.member')");
  REQUIRE(p->kind == PolicyNode::Kind::And);
  REQUIRE(p->children.size() == 1);
  CHECK(p->children[0]->org_id == "Org1");
}

TEST_CASE("keywords are case-insensitive and Out-Of takes a hyphen") {
  CHECK(parse_policy("and('Org1.member')")->kind == PolicyNode::Kind::And);
  CHECK(parse_policy("oR('Org1.member','Org2.member')")->kind ==
        PolicyNode::Kind::Or);
  auto p = parse_policy("Out-Of(1, 'Org1.member', 'Org2.member')");
  REQUIRE(p->kind == PolicyNode::Kind::OutOf);
  CHECK(p->k == 1);
  CHECK(parse_policy("OUTOF(2,'Org1.member','Org2.member')")->k == 2);
}

TEST_CASE("whitespace is free") {
  auto p = parse_policy("  AND ( 'Org1.member' ,\n\t'Org2.member' ) ");
  REQUIRE(p->children.size() == 2);
}

TEST_CASE("parse errors carry the offending byte offset") {
  SUBCASE("unknown keyword") {
    try {
      parse_policy("NAND('Org1.member')");
      FAIL("expected a parse error");
    } catch (const PolicyParseError& e) {
      CHECK(e.position == 0);
    }
  }
  SUBCASE("unterminated principal quote") {
    try {
      parse_policy("AND('Org1.member");
      FAIL("expected a parse error");
    } catch (const PolicyParseError& e) {
      CHECK(e.position == 5);
    }
  }
  SUBCASE("truncated argument list") {
    try {
      parse_policy("AND('Org1.member'");
      FAIL("expected a parse error");
    } catch (const PolicyParseError& e) {
      CHECK(e.position == 17);  // end of input
    }
  }
  SUBCASE("principal without a role") {
    CHECK_THROWS_AS(parse_policy("'Org1'"), PolicyParseError);
  }
  SUBCASE("unsupported role") {
    try {
      parse_policy("'Org1.admin'");
      FAIL("expected a parse error");
    } catch (const PolicyParseError& e) {
      CHECK(e.position == 6);  // start of "admin"
    }
  }
  SUBCASE("trailing input") {
    try {
      parse_policy("AND('Org1.member','Org2.member') extra");
      FAIL("expected a parse error");
    } catch (const PolicyParseError& e) {
      CHECK(e.position == 33);
    }
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(parse_policy(""), PolicyParseError);
  }
}

TEST_CASE("OutOf count must be within 1..children") {
  CHECK_THROWS_AS(parse_policy("OutOf(0,'Org1.member')"), PolicyParseError);
  CHECK_THROWS_AS(parse_policy("OutOf(3,'Org1.member','Org2.member')"),
                  PolicyParseError);
  CHECK_NOTHROW(parse_policy("OutOf(2,'Org1.member','Org2.member')"));
}

TEST_CASE("policy_to_string round-trips") {
  for (const char* text :
       {"AND('Org1.member','Org2.member')",
        "OR('Org1.member',AND('Org2.member','Org3.member'))",
        "OutOf(2,'Org1.member','Org2.member','Org3.member')",
        "'Org1.member'"}) {
    auto once = policy_to_string(parse_policy(text));
    auto twice = policy_to_string(parse_policy(once));
    CHECK(once == twice);
    CHECK(once == text);
  }
}

TEST_CASE("validate_policy rejects unknown orgs") {
  auto topo = Topology::with_counts({2, 2});
  CHECK_NOTHROW(
      validate_policy(parse_policy("AND('Org1.member','Org2.member')"), topo));
  CHECK_THROWS_AS(validate_policy(parse_policy("'Org3.member'"), topo),
                  std::invalid_argument);
}

TEST_CASE("org_of_peer resolves through the topology") {
  auto topo = Topology::with_counts({2, 3});
  CHECK(org_of_peer(topo, "Peer0.Org1") == "Org1");
  CHECK(org_of_peer(topo, "Peer2.Org2") == "Org2");
  CHECK_THROWS_AS(org_of_peer(topo, "Peer9.Org9"), std::invalid_argument);
}

TEST_CASE("AND selection picks exactly one peer per org") {
  auto topo = Topology::with_counts({2, 2});
  auto policy = parse_policy("AND('Org1.member','Org2.member')");
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    auto sel = select_endorsers(policy, topo, rng);
    REQUIRE(sel.size() == 2);
    auto orgs = orgs_of(topo, sel);
    CHECK(orgs.count("Org1") == 1);
    CHECK(orgs.count("Org2") == 1);
  }
}

TEST_CASE("OR selection picks a single peer") {
  auto topo = Topology::with_counts({2, 2});
  auto policy = parse_policy("OR('Org1.member','Org2.member')");
  Rng rng(2);
  for (int i = 0; i < 1000; ++i)
    CHECK(select_endorsers(policy, topo, rng).size() == 1);
}

TEST_CASE("selection is uniform over each org's peers") {
  // Two orgs, two peers each, AND policy: every peer should appear in half
  // the selections.
  auto topo = Topology::with_counts({2, 2});
  auto policy = parse_policy("AND('Org1.member','Org2.member')");
  const int trials = 100000;
  std::map<std::string, double> peer_freq;
  Rng rng(3);
  for (int i = 0; i < trials; ++i)
    for (const auto& p : select_endorsers(policy, topo, rng))
      peer_freq[p] += 1.0 / trials;
  REQUIRE(peer_freq.size() == 4);
  for (const auto& [peer, freq] : peer_freq)
    CHECK_MESSAGE(std::abs(freq - 0.5) < 0.01, peer, " at ", freq);
}

TEST_CASE("OR selection is uniform over branches and peers") {
  auto topo = Topology::with_counts({2, 2});
  auto policy = parse_policy("OR('Org1.member','Org2.member')");
  const int trials = 100000;
  std::map<std::string, double> peer_freq;
  double org1 = 0;
  Rng rng(4);
  for (int i = 0; i < trials; ++i) {
    auto sel = select_endorsers(policy, topo, rng);
    REQUIRE(sel.size() == 1);
    if (org_of_peer(topo, *sel.begin()) == "Org1") org1 += 1.0 / trials;
    peer_freq[*sel.begin()] += 1.0 / trials;
  }
  CHECK(std::abs(org1 - 0.5) < 0.01);
  for (const auto& [peer, freq] : peer_freq)
    CHECK_MESSAGE(std::abs(freq - 0.25) < 0.01, peer, " at ", freq);
}

TEST_CASE("OutOf(n of n) selects like AND") {
  auto topo = Topology::with_counts({2, 2});
  auto as_outof = parse_policy("OutOf(2,'Org1.member','Org2.member')");
  auto as_and = parse_policy("AND('Org1.member','Org2.member')");
  auto f1 = selection_frequencies(as_outof, topo, 100000, 11);
  auto f2 = selection_frequencies(as_and, topo, 100000, 12);
  REQUIRE(f1.size() == f2.size());
  for (const auto& [sel, freq] : f1)
    CHECK(std::abs(freq - f2.at(sel)) < 0.01);
}

TEST_CASE("OutOf(1) selects like OR") {
  auto topo = Topology::with_counts({2, 2});
  auto as_outof = parse_policy("OutOf(1,'Org1.member','Org2.member')");
  auto as_or = parse_policy("OR('Org1.member','Org2.member')");
  auto f1 = selection_frequencies(as_outof, topo, 100000, 13);
  auto f2 = selection_frequencies(as_or, topo, 100000, 14);
  REQUIRE(f1.size() == f2.size());
  for (const auto& [sel, freq] : f1)
    CHECK(std::abs(freq - f2.at(sel)) < 0.01);
}

TEST_CASE("is_satisfied over org multisets") {
  auto and2 = parse_policy("AND('Org1.member','Org2.member')");
  CHECK_FALSE(is_satisfied(and2, {"Org1"}));
  CHECK_FALSE(is_satisfied(and2, {"Org1", "Org1"}));
  CHECK(is_satisfied(and2, {"Org1", "Org2"}));

  auto mixed = parse_policy("OR('Org1.member',AND('Org2.member','Org3.member'))");
  CHECK(is_satisfied(mixed, {"Org1"}));
  CHECK(is_satisfied(mixed, {"Org2", "Org3"}));
  CHECK_FALSE(is_satisfied(mixed, {"Org2"}));
  CHECK_FALSE(is_satisfied(mixed, {}));

  auto two_of_three =
      parse_policy("OutOf(2,'Org1.member','Org2.member','Org3.member')");
  CHECK(is_satisfied(two_of_three, {"Org1", "Org3"}));
  CHECK(is_satisfied(two_of_three, {"Org1", "Org2", "Org3"}));
  CHECK_FALSE(is_satisfied(two_of_three, {"Org2"}));
}

TEST_CASE("every selection satisfies its policy") {
  auto topo = Topology::with_counts({2, 3, 1, 4});
  const char* policies[] = {
      "AND('Org1.member','Org2.member')",
      "OR('Org1.member','Org4.member')",
      "OutOf(2,'Org1.member','Org2.member','Org3.member')",
      "OR('Org3.member',AND('Org1.member','Org2.member','Org4.member'))",
      "AND('Org1.member',OutOf(1,'Org2.member','Org3.member'))",
  };
  Rng rng(99);
  for (const char* text : policies) {
    auto policy = parse_policy(text);
    validate_policy(policy, topo);
    for (int i = 0; i < 2000; ++i) {
      auto sel = select_endorsers(policy, topo, rng);
      CHECK_MESSAGE(is_satisfied(policy, orgs_of(topo, sel)), text);
    }
  }
}

TEST_CASE("selection is deterministic given the rng state") {
  auto topo = Topology::with_counts({3, 3});
  auto policy = parse_policy("OutOf(1,'Org1.member','Org2.member')");
  Rng a(7), b(7);
  for (int i = 0; i < 200; ++i)
    CHECK(select_endorsers(policy, topo, a) ==
          select_endorsers(policy, topo, b));
}
