package demo.billing;

import java.math.BigDecimal;
import java.math.RoundingMode;
import java.util.ArrayList;
import java.util.List;
import java.util.Map;

public class InvoiceService {
    private final Map<String, BigDecimal> taxRates;
    private final List<String> audit = new ArrayList<>();

    public InvoiceService(Map<String, BigDecimal> taxRates) {
        this.taxRates = taxRates;
    }

    public BigDecimal total(List<Line> lines, Customer customer) {
        BigDecimal subtotal = BigDecimal.ZERO;
        for (Line line : lines) {
            BigDecimal amount = line.price().multiply(BigDecimal.valueOf(line.quantity()));
            subtotal = subtotal.add(amount);
        }

        BigDecimal discount = BigDecimal.ZERO;
        if (customer.isLoyal()) {
            discount = subtotal.multiply(new BigDecimal("0.05"));
        }
        if (subtotal.compareTo(new BigDecimal("1000")) > 0) {
            discount = discount.add(new BigDecimal("25"));
        }

        BigDecimal rate = taxRates.getOrDefault(customer.region(), BigDecimal.ZERO);
        BigDecimal taxed = subtotal.subtract(discount).multiply(BigDecimal.ONE.add(rate));
        audit.add("total for " + customer.id() + ": " + taxed);
        return taxed.setScale(2, RoundingMode.HALF_UP);
    }

    public String render(Invoice invoice) {
        StringBuilder sb = new StringBuilder();
        sb.append("Invoice ").append(invoice.number()).append('\n');
        sb.append("Customer: ").append(invoice.customer().name()).append('\n');
        sb.append('\n');

        for (Line line : invoice.lines()) {
            sb.append(String.format("%-30s %5d %10s%n",
                    line.description(), line.quantity(), line.price()));
        }

        sb.append('\n');
        sb.append("Total: ").append(total(invoice.lines(), invoice.customer()));
        return sb.toString();
    }

    public List<String> validate(Invoice invoice) {
        List<String> problems = new ArrayList<>();
        if (invoice.number() == null || invoice.number().isBlank()) {
            problems.add("missing number");
        }
        if (invoice.lines().isEmpty()) {
            problems.add("no lines");
        }
        for (Line line : invoice.lines()) {
            if (line.quantity() <= 0) {
                problems.add("bad quantity on " + line.description());
            }
            if (line.price().signum() < 0) {
                problems.add("negative price on " + line.description());
            }
        }
        audit.add("validated " + invoice.number() + " with " + problems.size() + " problems");
        return problems;
    }

    public int countOverdue(List<Invoice> invoices, long today) {
        int overdue = 0;
        for (Invoice inv : invoices) {
            if (inv.dueDay() < today && !inv.paid()) {
                overdue++;
            }
        }
        return overdue;
    }
}
