"""
Array-backed sum tree over a fixed number of leaves.

配列ベースのサムツリー。葉数は 2 の冪に切り上げ、
ノード i の子は 2i, 2i+1、根は 1。
"""

import numpy as np


class SumTree:
    """
    Binary tree whose internal nodes hold the sum of their children.

    Attributes:
        capacity (int): Number of usable leaves.
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._leaf_start = 1
        while self._leaf_start < self.capacity:
            self._leaf_start *= 2
        self._tree = np.zeros(2 * self._leaf_start)

    @property
    def total(self):
        return float(self._tree[1])

    def leaves(self):
        return self._tree[self._leaf_start:self._leaf_start + self.capacity].copy()

    def update(self, index, value):
        """Sets leaf `index` to `value` and recomputes the sums on its path to the root."""
        if not 0 <= index < self.capacity:
            raise IndexError(f"leaf index {index} outside 0..{self.capacity - 1}")
        if value < 0 or not np.isfinite(value):
            raise ValueError(f"leaf value must be finite and non-negative, got {value}")
        node = self._leaf_start + index
        self._tree[node] = value
        node //= 2
        while node >= 1:
            self._tree[node] = self._tree[2 * node] + self._tree[2 * node + 1]
            node //= 2

    def prefix_find(self, mass):
        """
        Returns the leaf whose cumulative interval [c_{i-1}, c_i) contains mass.

        累積区間に mass を含む葉の添字を返す。

        Args:
            mass (float): 0 <= mass < total.

        Returns:
            int: Leaf index.

        Raises:
            ValueError: If mass is outside [0, total).
        """
        if not (0.0 <= mass < self.total):
            raise ValueError(f"mass {mass} outside [0, {self.total})")
        node = 1
        while node < self._leaf_start:
            left = 2 * node
            left_sum = self._tree[left]
            right_sum = self._tree[left + 1]
            # Never descend into an empty subtree, even under rounding.
            if (mass < left_sum and left_sum > 0.0) or right_sum <= 0.0:
                node = left
            else:
                mass -= left_sum
                node = left + 1
        return node - self._leaf_start

    def update_many(self, indices, values):
        """
        Sets several leaves at once; for a repeated index the last value wins.

        The resulting tree is identical to applying update() in order.
        """
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if indices.size == 0:
            return
        if np.any(indices < 0) or np.any(indices >= self.capacity):
            raise IndexError(f"leaf index outside 0..{self.capacity - 1}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("leaf values must be finite and non-negative")
        # Keep the last occurrence of each index.
        reversed_unique, first_in_reversed = np.unique(indices[::-1], return_index=True)
        last_values = values[::-1][first_in_reversed]
        self._tree[self._leaf_start + reversed_unique] = last_values
        nodes = np.unique((self._leaf_start + reversed_unique) // 2)
        while nodes.size and nodes[0] >= 1:
            self._tree[nodes] = self._tree[2 * nodes] + self._tree[2 * nodes + 1]
            nodes = np.unique(nodes // 2)
            nodes = nodes[nodes >= 1]

    def prefix_find_many(self, masses):
        """Vectorized prefix_find(); same descent rule, one leaf per mass."""
        masses = np.array(masses, dtype=np.float64)
        if np.any(masses < 0.0) or np.any(masses >= self.total):
            raise ValueError(f"mass outside [0, {self.total})")
        nodes = np.ones(masses.shape, dtype=np.int64)
        while nodes.size and nodes[0] < self._leaf_start:
            left = 2 * nodes
            left_sum = self._tree[left]
            right_sum = self._tree[left + 1]
            go_left = ((masses < left_sum) & (left_sum > 0.0)) | (right_sum <= 0.0)
            masses = np.where(go_left, masses, masses - left_sum)
            nodes = np.where(go_left, left, left + 1)
        return nodes - self._leaf_start
