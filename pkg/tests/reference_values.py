"""Oracle values frozen by ``freeze_reference.py``; do not edit by hand."""

REF = {'clt': {('gamma3', 5.0): 0.0787660374692793,
         ('gamma3', 50.0): 0.00944557028315895,
         ('logistic', 50.0): 0.010752466388932017},
 'gamma3_conv_logistic': {'H': 2.323661289337648,
                          'I': 0.1734699631092541,
                          'J': 0.03538577226999356,
                          'mass': 0.9999999999999997},
 'gamma3_conv_m1': {'H': 2.070714923649722,
                    'I': 0.3130701650771991,
                    'J': 0.1345690776313135,
                    'mass': 0.9999999999999998},
 'gamma3_entropy': 1.8475785103630111,
 'gamma3_heat_entropy': {0.0: 1.8475785103630111,
                         0.1: 1.9124615871480999,
                         0.5: 2.070714923649722,
                         1.0: 2.2021451171776785,
                         2.0: 2.3835727748841125},
 'gamma3_rate2_entropy': 1.1544313298030657,
 'gamma4_conv_m1': {'H': 2.184665810306818,
                    'I': 0.24916557998507466,
                    'J': 0.08712035759547102,
                    'mass': 0.9999999999999998},
 'gamma4_fisher': 0.5,
 'gamma6': {'H': 2.2569034006230435, 'I': 0.25, 'J': 0.20833333333333334, 'mass': 1.0},
 'gamma6_conv_logistic': {'H': 2.5185601936914956,
                          'I': 0.11721599555973794,
                          'J': 0.015963905039648472,
                          'mass': 1.0},
 'gamma6_conv_m1': {'H': 2.358573564206452,
                    'I': 0.17379380557606922,
                    'J': 0.042477314085708054,
                    'mass': 1.0},
 'gamma6_logistic_P_kappa_400': {'spread': 8.777231727628706e-10, 'value': 0.002114441611290139},
 'gamma6_logistic_kappa_bar': 0.6256984526781856,
 'gumbel': {'H': 1.5772156649015328, 'I': 1.0, 'J': 2.0, 'mass': 1.0},
 'logistic': {'H': 2.0, 'I': 0.3333333333333333, 'J': 0.13333333333333333, 'mass': 1.0},
 'weibull5': {'H': -0.1476653805128741,
              'I': 23.827075981005073,
              'J': 661.0814945278277,
              'mass': 1.0}}
