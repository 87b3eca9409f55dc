from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # tolerances
    eps_feas: float = 1e-7
    eps_gap: float = 1e-6
    eps_psd: float = 1e-8
    eps_orth: float = 1e-10
    eps_pd: float = 1e-12

    # interior point method
    max_iters: int = 100
    step_fraction: float = 0.99
    init_scale: float = 1.0
    schur_regularization: float = 1e-10
    solver_backend: str = "builtin"

    # rank detection / extraction
    rank_threshold_p: int = 6
    rank_zero_tol: float = 1e-12
    moment_split_seed: int = 20231

    # decomposition
    normalize_mu: bool = True

    # validation oracles
    oracle_resolution_1d: int = 1_000_000
    oracle_resolution_2d: int = 2000

    log_level: str = "INFO"

    class Config:
        env_file = "./.env"
        env_file_encoding = "utf-8"
        extra = 'ignore'


settings = Settings()
