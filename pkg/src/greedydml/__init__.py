"""OGA+HDAIC nuisance estimation with double/debiased machine learning."""
