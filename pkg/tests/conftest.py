import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def small_task(seed=3, image_size=16, n_train=8, n_val=4):
    from catpress.tasks import SyntheticTask

    return SyntheticTask(seed=seed, image_size=image_size, n_train=n_train, n_val=n_val)


def tiny_teacher(base=6, blocks=1, hw=16):
    from catpress.arch import build_resnet_template

    return build_resnet_template(base, blocks, 1, 3, "incres", "instance", input_hw=hw)
