"""Reduced units used by every numerical routine.

All simulation code works with ``hbar = kB = 1`` and a tagged-particle mass of
1 unless a mass is passed explicitly.  Physical SI values only enter through
:func:`pwbrownian.langevin.gold_case`.

=============  ==========================  ============================
quantity       reduced unit                SI conversion (given scales)
=============  ==========================  ============================
energy         ``hbar * omega_ref``        multiply by ``hbar_SI*omega_ref``
time           ``1 / omega_ref``           divide by ``omega_ref`` [rad/s]
length         ``sqrt(hbar/(m*omega_ref))``
temperature    energy / kB                 ``kB_SI`` J/K
=============  ==========================  ============================
"""

HBAR = 1.0
KB = 1.0
