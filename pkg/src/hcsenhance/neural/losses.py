"""Loss terms for the adversarial translation models.

The default adversarial objective is the log form with a non-saturating
generator: the generator maximizes log D(fake) rather than minimizing
log(1 - D(fake)). A least-squares variant is selectable through the
training configuration.
"""

import torch

# sigmoid outputs are clamped into this open interval before taking logs
PROB_EPS = 1e-7

GAN_MODES = ("log", "lsq")


def _check_mode(mode: str) -> None:
    if mode not in GAN_MODES:
        raise ValueError(f"gan mode must be one of {GAN_MODES}, got {mode!r}")


def _clamped_sigmoid(logits: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(logits).clamp(PROB_EPS, 1.0 - PROB_EPS)


def discriminator_gan_loss(real_logits: torch.Tensor,
                           fake_logits: torch.Tensor,
                           mode: str = "log") -> torch.Tensor:
    _check_mode(mode)
    if mode == "log":
        p_real = _clamped_sigmoid(real_logits)
        p_fake = _clamped_sigmoid(fake_logits)
        return -(torch.log(p_real).mean() + torch.log(1.0 - p_fake).mean())
    return ((real_logits - 1.0) ** 2).mean() + (fake_logits ** 2).mean()


def generator_gan_loss(fake_logits: torch.Tensor,
                       mode: str = "log") -> torch.Tensor:
    _check_mode(mode)
    if mode == "log":
        return -torch.log(_clamped_sigmoid(fake_logits)).mean()
    return ((fake_logits - 1.0) ** 2).mean()


def gan_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor,
             mode: str = "log"):
    """Return (discriminator_loss, generator_loss) for one batch of logits."""
    return (discriminator_gan_loss(real_logits, fake_logits, mode),
            generator_gan_loss(fake_logits, mode))


def l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def cycle_loss(g_ab, g_ba, batch_a: torch.Tensor,
               batch_b: torch.Tensor) -> torch.Tensor:
    """Mean L1 between each batch and its round-trip reconstruction.

    Both directions contribute: |G_ba(G_ab(a)) - a| + |G_ab(G_ba(b)) - b|.
    """
    rec_a = g_ba(g_ab(batch_a))
    rec_b = g_ab(g_ba(batch_b))
    return l1(rec_a, batch_a) + l1(rec_b, batch_b)


def l1_paired_loss(g, batch_x: torch.Tensor,
                   batch_y: torch.Tensor) -> torch.Tensor:
    """Mean L1 between G(x) and the paired target y."""
    if batch_x.shape[0] != batch_y.shape[0]:
        raise ValueError("paired batches must have equal size, got "
                         f"{batch_x.shape[0]} vs {batch_y.shape[0]}")
    return l1(g(batch_x), batch_y)
