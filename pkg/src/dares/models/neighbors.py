"""Top-N recommenders over implicit interactions: popularity counts and
item-based kNN with cosine similarity.

Both rank the training catalog minus the user's own history; every tie
anywhere (similarities, scores, counts) breaks toward the ascending item
identifier so rankings are fully reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import EmptyInteractions


def _histories(users, items) -> tuple[dict, dict]:
    user_items: dict = {}
    item_users: dict = {}
    for u, i in zip(users, items):
        user_items.setdefault(u, set()).add(i)
        item_users.setdefault(i, set()).add(u)
    return user_items, item_users


@dataclass
class PopularityModel:
    model_id: str
    counts: dict  # item -> interaction count
    user_items: dict
    catalog: list

    def recommend(self, user, k: int) -> list[tuple[object, float]]:
        history = self.user_items.get(user, set())
        ranked = sorted(
            (item for item in self.catalog if item not in history),
            key=lambda item: (-self.counts[item], item),
        )
        return [(item, float(self.counts[item])) for item in ranked[:k]]

    def params_dump(self) -> dict:
        return {"counts": {str(i): self.counts[i] for i in self.catalog}}


def train_popularity(users, items, hp: dict | None = None) -> PopularityModel:
    if len(items) == 0:
        raise EmptyInteractions("popularity needs at least one interaction")
    user_items, item_users = _histories(users, items)
    counts: dict = {}
    for i in items:
        counts[i] = counts.get(i, 0) + 1
    return PopularityModel("popularity", counts, user_items, sorted(counts))


@dataclass
class ItemKnnModel:
    model_id: str
    neighbors: dict  # item -> list of (neighbor item, similarity), pruned to top k
    user_items: dict
    catalog: list

    def score(self, user, item) -> float:
        history = self.user_items.get(user)
        if not history:
            return 0.0
        return sum(s for nbr, s in self.neighbors.get(item, ()) if nbr in history)

    def recommend(self, user, k: int) -> list[tuple[object, float]]:
        history = self.user_items.get(user, set())
        scored = [(item, self.score(user, item)) for item in self.catalog if item not in history]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]

    def params_dump(self) -> dict:
        return {
            "neighbors": {str(i): [[str(n), s] for n, s in self.neighbors.get(i, [])] for i in self.catalog}
        }


def train_item_knn(users, items, hp: dict) -> ItemKnnModel:
    """Cosine similarity over binary item-user vectors, shrunk by
    co_count / (co_count + shrinkage), pruned to each item's top k_neighbors."""
    if len(items) == 0:
        raise EmptyInteractions("item kNN needs at least one interaction")
    k_neighbors = int(hp["k_neighbors"])
    shrinkage = float(hp["shrinkage"])

    user_items, item_users = _histories(users, items)
    catalog = sorted(item_users)
    sims: dict = {i: [] for i in catalog}
    for a_pos, a in enumerate(catalog):
        ua = item_users[a]
        for b in catalog[a_pos + 1 :]:
            ub = item_users[b]
            co = len(ua & ub)
            if co == 0:
                continue
            sim = co / math.sqrt(len(ua) * len(ub))
            sim *= co / (co + shrinkage)
            sims[a].append((b, sim))
            sims[b].append((a, sim))

    neighbors = {}
    for item, pairs in sims.items():
        pairs.sort(key=lambda pair: (-pair[1], pair[0]))
        neighbors[item] = pairs[:k_neighbors]
    return ItemKnnModel("item_knn", neighbors, user_items, catalog)
