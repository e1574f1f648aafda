#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>

#include "cpmartingale/rng.hpp"

namespace cpm {

/// Growing multiset of non-conformity scores with O(log n) insert and
/// rank queries. Implemented as a treap keyed by score value, one node
/// per distinct value with a duplicate count and subtree sizes.
///
/// Treap priorities come from a fixed-seed generator, so two buffers
/// fed the same insertion sequence are structurally identical.
class ScoreBuffer {
 public:
  struct RankCounts {
    std::size_t greater = 0;
    std::size_t equal = 0;
  };

  void insert(double alpha) {
    if (!std::isfinite(alpha)) throw std::invalid_argument("ScoreBuffer::insert: score must be finite");
    prio_state_ = splitmix64(prio_state_);
    root_ = insert_node(std::move(root_), alpha, prio_state_);
    ++count_;
  }

  /// Counts of stored scores strictly greater than / equal to alpha.
  RankCounts rank_counts(double alpha) const {
    RankCounts rc;
    const Node* cur = root_.get();
    while (cur != nullptr) {
      if (alpha < cur->key) {
        rc.greater += cur->dup + subtree_size(cur->right.get());
        cur = cur->left.get();
      } else if (alpha > cur->key) {
        cur = cur->right.get();
      } else {
        rc.greater += subtree_size(cur->right.get());
        rc.equal = cur->dup;
        break;
      }
    }
    return rc;
  }

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

 private:
  struct Node {
    double key;
    std::uint64_t prio;
    std::size_t dup = 1;
    std::size_t size = 1;
    std::unique_ptr<Node> left;
    std::unique_ptr<Node> right;
    Node(double k, std::uint64_t p) : key(k), prio(p) {}
  };
  using NodePtr = std::unique_ptr<Node>;

  static std::size_t subtree_size(const Node* n) { return n ? n->size : 0; }

  static void update(Node* n) {
    n->size = n->dup + subtree_size(n->left.get()) + subtree_size(n->right.get());
  }

  static NodePtr rotate_right(NodePtr t) {
    NodePtr l = std::move(t->left);
    t->left = std::move(l->right);
    update(t.get());
    l->right = std::move(t);
    update(l.get());
    return l;
  }

  static NodePtr rotate_left(NodePtr t) {
    NodePtr r = std::move(t->right);
    t->right = std::move(r->left);
    update(t.get());
    r->left = std::move(t);
    update(r.get());
    return r;
  }

  static NodePtr insert_node(NodePtr t, double key, std::uint64_t prio) {
    if (!t) return std::make_unique<Node>(key, prio);
    if (key == t->key) {
      ++t->dup;
      ++t->size;
      return t;
    }
    if (key < t->key) {
      t->left = insert_node(std::move(t->left), key, prio);
      update(t.get());
      if (t->left->prio > t->prio) t = rotate_right(std::move(t));
    } else {
      t->right = insert_node(std::move(t->right), key, prio);
      update(t.get());
      if (t->right->prio > t->prio) t = rotate_left(std::move(t));
    }
    return t;
  }

  NodePtr root_;
  std::size_t count_ = 0;
  std::uint64_t prio_state_ = 0xC0FFEE5EEDULL;
};

}  // namespace cpm
