"""测试公共夹具"""

import numpy as np
import pytest

from oneclass_rec.interactions import InteractionDataset, build_dataset


def random_dataset(num_users: int, num_items: int, per_user: int, seed: int = 0) -> InteractionDataset:
    """每个用户随机交互 per_user 个物品"""
    rng = np.random.default_rng(seed)
    pairs = [
        (j, k)
        for j in range(num_users)
        for k in rng.choice(num_items, size=per_user, replace=False)
    ]
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        pairs=np.asarray(pairs, dtype=np.int64),
        user_ids=tuple(str(j) for j in range(num_users)),
        item_ids=tuple(str(k) for k in range(num_items)),
    )


@pytest.fixture
def tiny_ds():
    return build_dataset([("u1", "i1"), ("u1", "i2"), ("u2", "i2"), ("u3", "i3"), ("u3", "i1")])


@pytest.fixture
def warm_ds():
    return random_dataset(num_users=50, num_items=120, per_user=3, seed=1)


@pytest.fixture
def write_text(tmp_path):
    def _write(name: str, content: str):
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return path
    return _write
