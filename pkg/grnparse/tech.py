"""Full-scale and desk-scale constants."""


class Presets:
    """Hyper-parameters shared by recipes, configs and the CLI.

    ``full_epochs`` and the ``c_*`` counts are the full-scale settings; the
    ``desk_*`` values keep a CPU run within minutes on the synthetic corpus.
    """

    lr: float = 0.007
    momentum: float = 0.9
    weight_decay: float = 5e-4
    poly_power: float = 0.9
    batch_size: int = 10
    scale_range: tuple[float, float] = (0.5, 1.5)

    full_epochs: int = 150
    c_lip: int = 20
    c_atr: int = 18

    desk_epochs: int = 40
    desk_batch_size: int = 8
    desk_size: int = 64
    desk_c: int = 8
    desk_c_prime: int = 16
    desk_d: int = 64
    desk_n_high: int = 3
    alpha: float = 1.0

    labeled_fractions: tuple[float, ...] = (1 / 8, 1 / 4, 1 / 2)


PRESETS = Presets()
