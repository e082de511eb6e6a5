# # Greedy forward selection with an information-criterion stop
#
# The orthogonal greedy algorithm adds one regressor at a time, always the
# one most correlated with the current residual. The criterion below then
# picks how far along that path to go.

# In[1]:

import numpy as np

from greedydml.oga import compute_m_star, fit_nuisance, hdaic_values, oga_order, select_model

rng = np.random.default_rng(1)
n, p = 300, 400
X = rng.standard_normal((n, p))
coef = np.zeros(p)
coef[[3, 50, 199, 320]] = [2.0, -1.5, 1.0, 0.5]
y = X @ coef + rng.standard_normal(n)


# The path length is capped at about `5 * sqrt(n / log p)` steps.

# In[2]:

m_star = compute_m_star(n, p)
path = oga_order(X, y, m_star)
print("path length:", m_star)
print("first six picks:", path.order[:6])


# Residual variance falls with each step; the penalty `1 + C* m log(p) / n`
# eventually outweighs it.

# In[3]:

crit = hdaic_values(path, p, n, c_star=2.0)
m_hat = select_model(crit)
for m in range(1, 8):
    mark = "  <- selected" if m == m_hat else ""
    print(f"m={m}  sigma^2={path.sigma_sq[m - 1]:.3f}  HDAIC={crit[m - 1]:.3f}{mark}")


# `fit_nuisance` wraps the three steps and refits OLS on the chosen support.

# In[4]:

fit = fit_nuisance(X, y)
print("support:", sorted(fit.support))
print("coefficients:", np.round(fit.coefficients[sorted(fit.support)], 3))
