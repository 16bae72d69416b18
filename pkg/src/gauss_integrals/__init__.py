# Gaussian expectations of nonlinearities: constants a, b, c and the I2/I3/I4 integrals
