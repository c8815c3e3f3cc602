// Control panel: interaction mode plus the two sampling temperatures.
// Every change goes out immediately as a /config frame; no reload.

import { ConfigFrame, MODES, Mode, configFrame } from './protocol.js';

export interface PanelElements {
  mode: HTMLSelectElement;
  piTemp: HTMLInputElement;
  piTempLabel: HTMLElement;
  sigmaTemp: HTMLInputElement;
  sigmaTempLabel: HTMLElement;
  reset: HTMLButtonElement;
}

export class ControlPanel {
  constructor(
    private readonly el: PanelElements,
    private readonly send: (frame: ConfigFrame) => void,
    private readonly resetModel: () => void,
  ) {
    for (const mode of MODES) {
      const option = document.createElement('option');
      option.value = mode;
      option.textContent = mode;
      el.mode.appendChild(option);
    }
    el.mode.value = 'callresponse';
    el.mode.addEventListener('change', () => {
      this.send(configFrame({ mode: el.mode.value as Mode }));
    });
    el.piTemp.addEventListener('input', () => this.sendTemps());
    el.sigmaTemp.addEventListener('input', () => this.sendTemps());
    el.reset.addEventListener('click', () => this.resetModel());
    this.updateLabels();
  }

  private sendTemps(): void {
    this.updateLabels();
    this.send(
      configFrame({
        piTemp: Number(this.el.piTemp.value),
        sigmaTemp: Number(this.el.sigmaTemp.value),
      }),
    );
  }

  private updateLabels(): void {
    this.el.piTempLabel.textContent = Number(this.el.piTemp.value).toFixed(2);
    this.el.sigmaTempLabel.textContent = Number(this.el.sigmaTemp.value).toFixed(2);
  }

  /** The starting mode shown in the selector, sent once on connect. */
  announce(): void {
    this.send(configFrame({ mode: this.el.mode.value as Mode }));
  }
}
