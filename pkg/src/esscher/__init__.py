"""Second-order Esscher pricing for jump-diffusion and Levy models."""
from .analytic import (TruncationError, TruncationPolicy, bs_call, bs_delta, bs_put, cjd_call,
                       cjd_call_detail, cjd_price_interval, cjd_put, ljd_call_exact,
                       ljd_call_first_order, ljd_call_second_order, merton_call)
from .calibration import CalibConfig, CalibResult, QuoteSet, calibrate, implied_vol
from .charfn import (CharFn, charfn_bs, charfn_cjd, charfn_for_measure, charfn_jd_general,
                     charfn_kou_1st, charfn_kou_2nd, charfn_kou_qbs, charfn_ljd_2nd,
                     charfn_merton_qbs, charfn_vg_1st, charfn_vg_2nd)
from .estimation import FitConfig, FitResult, ReturnSeries, fit_mle, fit_nested, loglik
from .fft import FftCurve, FftGrid, fft_call_curve, fft_price, fft_put_curve, price_at_strike
from .hedging import (BSPricer, CJDPricer, HedgeConfig, HedgeReport, MertonPricer, hedge_simulate,
                      model_delta, var_es, var_es_sweep)
from .measure import (EsscherMeasure, EsscherMeasureCJD, SolverError, cjd_measure,
                      cjd_no_jump_risk, esscher_measure, martingale_residual)
from .models import (CJD, GBM, LJD, VG, DomainError, KouDE, MarketContext, MeasureClass,
                     ModelError, OptionKind, OptionSpec)
from .montecarlo import PathSet, Payoff, mc_price, simulate_cjd_rpsi, simulate_p, simulate_q

__version__ = "0.1.0"
