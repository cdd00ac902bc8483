import numpy as np
import pytest
import torch
import torch.nn.functional as F

from src.agents.ild_agent import (
    IldMaskAgent,
    build_net,
    ild_image,
    load_model,
    make_ground_truth,
    make_optimizer,
    normalize_ild,
    predict_ild_mask,
    save_model,
    train,
)
from src.errors import DegenerateDatasetError, DivergenceError, ShapeMismatchError
from src.models.audio_models import INTERAURAL, InterauralSpectrogram
from src.models.learning_models import MaskClass, NetConfig, TrainHyper

TINY = NetConfig(height=16, width=8, channels=(4, 8))


def _toy_set(count: int = 10, seed: int = 0):
    """Bright DP images and dark REV images with a little texture"""
    rng = np.random.default_rng(seed)
    images, masks = [], []
    for index in range(count):
        mask_class = MaskClass.DP if index % 2 == 0 else MaskClass.REV
        level = 0.8 if mask_class == MaskClass.DP else 0.2
        images.append((level + 0.05 * rng.standard_normal((16, 8))).astype(np.float32))
        masks.append(make_ground_truth(mask_class, (16, 8)))
    return images, masks


def test_output_is_a_probability_map():
    model = build_net(TINY, seed=1).eval()
    probs = model(torch.rand(3, 1, 16, 8))
    assert probs.shape == (3, 2, 16, 8)
    torch.testing.assert_close(probs.sum(dim=1), torch.ones(3, 16, 8))


def test_build_net_is_reproducible():
    first, second, other = build_net(TINY, seed=3), build_net(TINY, seed=3), build_net(TINY, seed=4)
    for name, tensor in first.state_dict().items():
        assert torch.equal(tensor, second.state_dict()[name])
    assert not torch.equal(first.encoder[0].weight, other.encoder[0].weight)
    assert torch.count_nonzero(first.encoder[0].bias) == 0


def test_net_config_validation():
    with pytest.raises(ValueError):
        NetConfig(height=15, width=8)
    with pytest.raises(ValueError):
        NetConfig(num_classes=3)
    assert TrainHyper.for_rt60(0.89).epochs == 5
    assert TrainHyper.for_rt60(0.25).epochs == 30


@pytest.mark.parametrize("batch_size, epochs", [(2, 30), (8, 60)])
def test_learns_toy_separation(batch_size, epochs):
    images, masks = _toy_set()
    hyper = TrainHyper(learning_rate=0.01, momentum=0.95, batch_size=batch_size, epochs=epochs,
                       train_fraction=1.0, plateau_patience=None)
    model = train(build_net(TINY, seed=0), images, masks, hyper, seed=0)
    assert model.metadata.epochs_run == epochs
    correct = 0
    for image, mask in zip(images, masks):
        predicted_dp = predict_ild_mask(model, image).values > 0.5
        correct += int(np.sum(predicted_dp == (mask.labels == MaskClass.DP)))
    assert correct / (10 * 16 * 8) >= 0.99


def test_full_batch_training_loss_never_increases():
    images, masks = _toy_set()
    config = TINY.model_copy(update={"dropout": 0.0})
    hyper = TrainHyper(learning_rate=0.01, momentum=0.1, batch_size=len(images), epochs=15,
                       train_fraction=1.0, plateau_patience=None)
    model = train(build_net(config, seed=0), images, masks, hyper, seed=0)
    losses = [record.loss for record in model.metadata.history]
    assert len(losses) == 15
    assert all(later <= earlier + 1e-6 for earlier, later in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_training_is_deterministic():
    images, masks = _toy_set(count=4)
    hyper = TrainHyper(batch_size=2, epochs=2, train_fraction=1.0, plateau_patience=None)
    a = train(build_net(TINY, seed=5), images, masks, hyper, seed=5)
    b = train(build_net(TINY, seed=5), images, masks, hyper, seed=5)
    assert [r.loss for r in a.metadata.history] == [r.loss for r in b.metadata.history]


def test_gradients_match_finite_differences():
    config = NetConfig(height=4, width=4, channels=(2, 2), dropout=0.0)
    model = build_net(config, seed=2).double().eval()
    target = torch.randint(0, 2, (1, 4, 4), generator=torch.Generator().manual_seed(0))
    image = torch.rand(1, 1, 4, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(1))

    def loss_of(x):
        return F.cross_entropy(model.logits(x), target)

    assert torch.autograd.gradcheck(loss_of, (image.clone().requires_grad_(True),), eps=1e-6, atol=1e-5)

    weight = model.classifier.weight
    model.zero_grad()
    loss_of(image).backward()
    analytic = weight.grad[0, 0, 0, 0].item()
    step = 1e-6
    with torch.no_grad():
        weight[0, 0, 0, 0] += step
        plus = loss_of(image).item()
        weight[0, 0, 0, 0] -= 2 * step
        minus = loss_of(image).item()
        weight[0, 0, 0, 0] += step
    assert analytic == pytest.approx((plus - minus) / (2 * step), rel=1e-4, abs=1e-8)


def test_weight_decay_shrinks_idle_parameters():
    model = build_net(TINY, seed=0)
    hyper = TrainHyper(learning_rate=0.1, l2=0.01)
    optimizer = make_optimizer(model, hyper)
    before = model.classifier.weight.detach().clone()
    for parameter in model.parameters():
        parameter.grad = torch.zeros_like(parameter)
    optimizer.step()
    torch.testing.assert_close(model.classifier.weight.detach(), before * (1 - 0.1 * 0.01))


def test_training_input_errors():
    images, masks = _toy_set(count=4)
    hyper = TrainHyper(epochs=1, train_fraction=1.0)
    with pytest.raises(DegenerateDatasetError):
        train(build_net(TINY), images[::2], masks[::2], hyper)
    with pytest.raises(ShapeMismatchError):
        train(build_net(TINY), images[:3] + [np.zeros((16, 6), np.float32)], masks, hyper)
    broken = [image.copy() for image in images]
    broken[0][0, 0] = np.nan
    with pytest.raises(DivergenceError):
        train(build_net(TINY), broken, masks, hyper)


@pytest.mark.parametrize("width", [70, 100, 7])
def test_prediction_keeps_input_width(width):
    model = build_net(TINY, seed=0)
    mask = predict_ild_mask(model, np.full((16, width), 0.5, dtype=np.float32))
    assert mask.shape == (16, width)
    assert np.all((mask.values >= 0) & (mask.values <= 1))
    with pytest.raises(ShapeMismatchError):
        predict_ild_mask(model, np.zeros((8, width), dtype=np.float32))


def test_checkpoint_round_trip(tmp_path):
    images, masks = _toy_set(count=4)
    model = train(build_net(TINY, seed=0), images, masks,
                  TrainHyper(batch_size=2, epochs=1, train_fraction=1.0), seed=0)
    path = str(tmp_path / "model.ckpt")
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == TINY
    assert loaded.metadata.epochs_run == 1
    for name, tensor in model.state_dict().items():
        assert torch.equal(tensor, loaded.state_dict()[name])
    image = np.random.default_rng(0).random((16, 8)).astype(np.float32)
    np.testing.assert_array_equal(predict_ild_mask(loaded, image).values,
                                  predict_ild_mask(model, image).values)


def test_ild_normalization_and_agent_mask():
    np.testing.assert_allclose(normalize_ild(np.array([-40.0, -30.0, 0.0, 30.0, 45.0])),
                               [0.0, 0.0, 0.5, 1.0, 1.0])
    cues = InterauralSpectrogram(ild_db=np.zeros((513, 5)), ipd=np.zeros((513, 5)),
                                 sample_rate=16000, config=INTERAURAL)
    assert ild_image(cues).shape == (1024, 5)
    agent = IldMaskAgent(build_net(NetConfig(height=1024, width=6, channels=(2, 2)), seed=0))
    assert agent.mask_for(cues).shape == (513, 5)


def test_fit_writes_checkpoint_and_log(tmp_path):
    images, masks = _toy_set(count=4)
    agent = IldMaskAgent()
    agent.fit(images, masks, TINY, TrainHyper(batch_size=2, epochs=2, train_fraction=1.0),
              seed=0, checkpoint_path=str(tmp_path / "m.ckpt"), log_path=str(tmp_path / "log.csv"))
    assert (tmp_path / "m.ckpt").exists()
    assert len((tmp_path / "log.csv").read_text().strip().splitlines()) == 3
    assert IldMaskAgent.from_checkpoint(str(tmp_path / "m.ckpt")).model.metadata.epochs_run == 2


def test_zero_input_gives_finite_probabilities():
    model = build_net(TINY, seed=9).eval()
    assert torch.isfinite(model(torch.zeros(1, 1, 16, 8))).all()


def test_ground_truth_maps():
    dp = make_ground_truth(MaskClass.DP, (1024, 100))
    assert dp.labels.shape == (1024, 100) and np.all(dp.labels == MaskClass.DP)
    assert dp.mask_class == MaskClass.DP
    rev = make_ground_truth(MaskClass.REV, (4, 4))
    assert np.all(rev.labels == MaskClass.REV)
    np.testing.assert_array_equal(make_ground_truth(MaskClass.REV, (4, 4)).labels, rev.labels)
